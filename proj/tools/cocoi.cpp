// Command-line driver: planning, optimization, simulation, fitting, and the
// real master/worker runtime, all reading JSON configs and emitting CSV.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cocoi/errors.hpp"
#include "cocoi/latency.hpp"
#include "cocoi/log.hpp"
#include "cocoi/master.hpp"
#include "cocoi/model.hpp"
#include "cocoi/optimize.hpp"
#include "cocoi/simulate.hpp"
#include "cocoi/split.hpp"
#include "cocoi/worker.hpp"

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return j;
}

cocoi::SystemParams params_from_json(const json& j) {
  cocoi::SystemParams p;
  p.n = j.at("n").get<int>();
  p.layer = cocoi::geometry_from_json(j.at("layer"));
  p.profile = cocoi::profile_from_json(j.at("profile"));
  p.validate();
  return p;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << text;
}

std::string summary_csv(const std::vector<cocoi::SummaryStats>& rows) {
  std::string csv = "strategy,k,mean_s,std_s,p50,p95,fail_rate\n";
  for (const auto& r : rows) {
    csv += r.strategy + "," + std::to_string(r.k) + "," + fmt(r.mean_s) + "," + fmt(r.std_s) +
           "," + fmt(r.p50_s) + "," + fmt(r.p95_s) + "," + fmt(r.fail_rate) + "\n";
  }
  return csv;
}

cocoi::WorkerEndpoint parse_endpoint(const std::string& s) {
  const std::size_t colon = s.find_last_of(':');
  cocoi::WorkerEndpoint ep;
  if (colon == std::string::npos) {
    ep.port = static_cast<std::uint16_t>(std::stoi(s));
  } else {
    ep.host = s.substr(0, colon);
    ep.port = static_cast<std::uint16_t>(std::stoi(s.substr(colon + 1)));
  }
  return ep;
}

int cmd_plan(const std::string& config, int k) {
  const json j = read_json(config);
  const cocoi::LayerGeometry g = cocoi::geometry_from_json(j);
  const cocoi::SplitPlan plan = cocoi::plan_split(g.kernel, g.stride, g.w_in, k);
  std::cout << cocoi::to_json(plan).dump(2) << "\n";
  return 0;
}

int cmd_optimize(const std::string& config, const std::string& out) {
  const cocoi::SystemParams p = params_from_json(read_json(config));
  const cocoi::MinimizeResult r = cocoi::minimize_L(p);
  std::cout << "k_relaxed " << fmt(r.k_relaxed) << "\n";
  std::cout << "k_circ " << r.k_circ << "\n";
  std::cout << "L_at_k_circ " << fmt(cocoi::objective_L(r.k_circ, p)) << "\n";
  std::cout << "uncoded_expected " << fmt(cocoi::uncoded_expected(p)) << "\n";
  if (!out.empty()) {
    std::string csv = "k,L_s\n";
    for (int k = 1; k < p.n; ++k)
      csv += std::to_string(k) + "," + fmt(cocoi::objective_L(k, p)) + "\n";
    write_text(out, csv);
  }
  return 0;
}

int cmd_simulate(const std::string& config, std::size_t trials, std::uint64_t seed,
                 const std::string& out) {
  const json j = read_json(config);
  const cocoi::SystemParams p = params_from_json(j.at("system"));
  cocoi::ScenarioConfig sc;
  if (j.contains("scenario")) sc = cocoi::scenario_from_json(j.at("scenario"));
  std::vector<cocoi::SummaryStats> rows;
  if (j.contains("strategies")) {
    for (const auto& sj : j.at("strategies"))
      rows.push_back(cocoi::simulate_layer(cocoi::strategy_from_json(sj), p, sc, trials, seed));
  } else {
    rows.push_back(cocoi::simulate_layer(cocoi::Strategy::coded(0), p, sc, trials, seed));
  }
  write_text(out, summary_csv(rows));
  return 0;
}

int cmd_compare(const std::string& config, const std::string& hcurve, std::size_t trials,
                std::uint64_t seed, const std::string& out) {
  const json j = read_json(config);
  const cocoi::SystemParams p = params_from_json(j.contains("system") ? j.at("system") : j);
  const cocoi::MinimizeResult mr = cocoi::minimize_L(p);
  std::cout << "n " << p.n << "\n";
  std::cout << "k_circ " << mr.k_circ << "\n";
  std::cout << "coded_L " << fmt(cocoi::objective_L(mr.k_circ, p)) << "\n";
  std::cout << "uncoded_L " << fmt(cocoi::uncoded_expected(p)) << "\n";
  try {
    const cocoi::OptimalComparison oc = cocoi::optimal_comparison(p);
    std::cout << "k_sub_star " << fmt(oc.k_sub_star) << "\n";
    std::cout << "delta " << fmt(oc.delta) << "\n";
    std::cout << "reduction " << fmt(oc.reduction) << "\n";
  } catch (const std::exception& e) {
    std::cout << "comparison_unavailable " << e.what() << "\n";
  }
  if (!hcurve.empty()) {
    std::string csv = "e,h\n";
    for (int e = 1; e < p.n; ++e)
      csv += std::to_string(e) + "," + fmt(cocoi::straggler_gain(p.n, p.n - e)) + "\n";
    write_text(hcurve, csv);
  }
  if (trials > 0) {
    cocoi::ScenarioConfig sc;
    if (j.contains("scenario")) sc = cocoi::scenario_from_json(j.at("scenario"));
    std::vector<cocoi::SummaryStats> rows;
    for (const cocoi::Strategy& st :
         {cocoi::Strategy::coded(0), cocoi::Strategy::uncoded(), cocoi::Strategy::replication(),
          cocoi::Strategy::lt_fine(), cocoi::Strategy::lt_coarse(mr.k_circ)})
      rows.push_back(cocoi::simulate_layer(st, p, sc, trials, seed));
    write_text(out, summary_csv(rows));
  }
  return 0;
}

int cmd_fit(const std::string& samples_path, double scale) {
  std::ifstream in(samples_path);
  if (!in) throw std::runtime_error("cannot open samples: " + samples_path);
  std::vector<double> samples;
  double v;
  while (in >> v) samples.push_back(v);
  const cocoi::ShiftExpParams fit = cocoi::fit(samples, scale);
  std::cout << "mu " << fmt(fit.mu) << "\n";
  std::cout << "theta " << fmt(fit.theta) << "\n";
  return 0;
}

int cmd_worker(int port, std::uint32_t id, int inject_sleep_ms) {
  cocoi::WorkerOptions opts;
  opts.worker_id = id;
  opts.inject_sleep_ms = inject_sleep_ms;
  cocoi::run_worker(static_cast<std::uint16_t>(port), opts);
}

int cmd_master(const std::string& config, const std::vector<std::string>& workers,
               const std::string& input_path, int k, bool uncoded, double timeout_s,
               const std::string& profile_path, const std::string& out,
               const std::string& output_path) {
  const cocoi::ModelConfig model = cocoi::load_model(config);
  std::vector<cocoi::WorkerEndpoint> eps;
  for (const auto& w : workers) eps.push_back(parse_endpoint(w));
  const cocoi::Tensor4 input = cocoi::load_tensor(input_path);
  cocoi::ExecOptions opts;
  opts.k = k;
  opts.uncoded = uncoded;
  opts.timeout_s = timeout_s;
  if (!profile_path.empty())
    opts.profile = cocoi::profile_from_json(read_json(profile_path));
  const cocoi::MasterReport report = cocoi::run_master(model, eps, input, opts);
  std::string csv = "layer_id,phase,seconds\n";
  for (const auto& row : report.timing)
    csv += row.layer + "," + row.phase + "," + fmt(row.seconds) + "\n";
  write_text(out, csv);
  std::cout << "total_s " << fmt(report.total_s) << "\n";
  if (!output_path.empty()) cocoi::save_tensor(output_path, report.output);
  return 0;
}

int cmd_oracle(const std::string& config, const std::string& input_path,
               const std::string& output_path) {
  const cocoi::ModelConfig model = cocoi::load_model(config);
  cocoi::Tensor4 x = cocoi::load_tensor(input_path);
  for (const cocoi::LayerCfg& lc : model.layers) {
    if (lc.type == 1) {
      const cocoi::Tensor4d padded =
          cocoi::pad(cocoi::convert<double>(x), lc.spec.padding);
      x = cocoi::convert<float>(
          cocoi::conv2d(padded, cocoi::convert_spec<double>(lc.spec), true));
    } else if (lc.op == "relu") {
      std::vector<float> buf = x.data();
      for (float& v : buf)
        if (v < 0) v = 0;
      x = cocoi::Tensor4(x.dims(), std::move(buf));
    }
  }
  if (!output_path.empty()) cocoi::save_tensor(output_path, x);
  std::cout << "dims " << x.b() << " " << x.c() << " " << x.h() << " " << x.w() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded distributed convolution toolkit"};
  app.require_subcommand(1);

  std::string config, out, samples, input_path, output_path, profile_path, hcurve;
  std::vector<std::string> workers;
  int k = 0, port = 0, inject_sleep_ms = 0;
  std::uint32_t worker_id = 0;
  std::uint64_t seed = 1;
  std::size_t trials = 10000;
  double scale = 1.0, timeout_s = 0.0;
  bool uncoded = false;

  CLI::App* plan = app.add_subcommand("plan", "split a layer into k width pieces");
  plan->add_option("--config", config, "layer geometry JSON")->required();
  plan->add_option("--k", k, "piece count")->required();

  CLI::App* optimize = app.add_subcommand("optimize", "analytic split-count optimization");
  optimize->add_option("--config", config, "system JSON (n, layer, profile)")->required();
  optimize->add_option("--out", out, "L-curve CSV path");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo latency simulation");
  simulate->add_option("--config", config, "scenario JSON")->required();
  simulate->add_option("--trials", trials, "trial count");
  simulate->add_option("--seed", seed, "master seed");
  simulate->add_option("--out", out, "summary CSV path (default stdout)");

  CLI::App* compare = app.add_subcommand("compare", "coded vs uncoded comparison");
  compare->add_option("--config", config, "system JSON")->required();
  compare->add_option("--hcurve", hcurve, "straggler-gain curve CSV path");
  compare->add_option("--trials", trials, "simulated trials (0 = analytic only)")
      ->default_val(std::size_t{0});
  compare->add_option("--seed", seed, "master seed");
  compare->add_option("--out", out, "multi-strategy CSV path");

  CLI::App* fit = app.add_subcommand("fit", "fit shift-exponential parameters");
  fit->add_option("--samples", samples, "newline-delimited latency samples")->required();
  fit->add_option("--scale", scale, "workload size N of the samples")->default_val(1.0);

  CLI::App* worker = app.add_subcommand("worker", "serve conv subtasks over TCP");
  worker->add_option("--port", port, "listen port (0 = ephemeral, printed on stdout)")
      ->required();
  worker->add_option("--id", worker_id, "worker id reported in Hello");
  worker->add_option("--inject-sleep-ms", inject_sleep_ms,
                     "artificial delay before each subtask (testing)");

  CLI::App* master = app.add_subcommand("master", "run a model over TCP workers");
  master->add_option("--config", config, "model JSON")->required();
  master->add_option("--worker", workers, "worker endpoint host:port (repeatable)")
      ->required();
  master->add_option("--input", input_path, "input tensor file")->required();
  master->add_option("--k", k, "fixed split count (0 = per-layer optimizer)");
  master->add_flag("--uncoded", uncoded, "no-redundancy mode (n equal pieces)");
  master->add_option("--timeout", timeout_s, "per-subtask timeout seconds (0 = auto)");
  master->add_option("--profile", profile_path, "phase profile JSON for auto k/timeout");
  master->add_option("--out", out, "timing CSV path (default stdout)");
  master->add_option("--output", output_path, "write the inference output tensor here");

  CLI::App* oracle = app.add_subcommand("oracle", "local single-machine inference");
  oracle->add_option("--config", config, "model JSON")->required();
  oracle->add_option("--input", input_path, "input tensor file")->required();
  oracle->add_option("--output", output_path, "write the output tensor here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) return cmd_plan(config, k);
    if (optimize->parsed()) return cmd_optimize(config, out);
    if (simulate->parsed()) return cmd_simulate(config, trials, seed, out);
    if (compare->parsed()) return cmd_compare(config, hcurve, trials, seed, out);
    if (fit->parsed()) return cmd_fit(samples, scale);
    if (worker->parsed()) return cmd_worker(port, worker_id, inject_sleep_ms);
    if (master->parsed())
      return cmd_master(config, workers, input_path, k, uncoded, timeout_s, profile_path, out,
                        output_path);
    if (oracle->parsed()) return cmd_oracle(config, input_path, output_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
