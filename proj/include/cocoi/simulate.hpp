#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocoi/latency.hpp"
#include "cocoi/lt.hpp"
#include "cocoi/optimize.hpp"
#include "cocoi/rng.hpp"

namespace cocoi {

enum class ScenarioKind { baseline, straggling, failure, straggle_and_fail };

// Scenario knobs of the three studies: extra transmission delay with mean
// lambda_tr * E[T_phase] (scenario 1), n_f workers that never return with
// re-dispatch at timeout_s for uncoded (scenario 2), one designated straggler
// whose compute runs slow_factor slower (scenario 3 adds failures on top).
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::baseline;
  double lambda_tr = 0.0;
  int n_f = 0;
  double timeout_s = 0.0;     // 0 = auto: 5x the predicted mean subtask latency
  double slow_factor = 1.68;  // testbed-observed straggler ratio
  // verification mode: per-phase order statistics rescaled so their means
  // match the log-approximated closed forms instead of the harmonic ones
  bool log_order_stat = false;

  void validate(int n) const {
    if (lambda_tr < 0) throw std::invalid_argument("lambda_tr must be >= 0");
    if (n_f < 0 || n_f >= n) throw std::invalid_argument("need 0 <= n_f < n");
    if (timeout_s < 0) throw std::invalid_argument("timeout_s must be >= 0");
    if (slow_factor <= 1.0 && (kind == ScenarioKind::straggle_and_fail))
      throw std::invalid_argument("slow_factor must be > 1");
  }
};

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig s;
  const std::string kind = j.value("kind", "baseline");
  if (kind == "baseline")
    s.kind = ScenarioKind::baseline;
  else if (kind == "straggling")
    s.kind = ScenarioKind::straggling;
  else if (kind == "failure")
    s.kind = ScenarioKind::failure;
  else if (kind == "straggle_and_fail")
    s.kind = ScenarioKind::straggle_and_fail;
  else
    throw std::invalid_argument("unknown scenario kind: " + kind);
  s.lambda_tr = j.value("lambda_tr", 0.0);
  s.n_f = j.value("n_f", 0);
  s.timeout_s = j.value("timeout_s", 0.0);
  s.slow_factor = j.value("slow_factor", 1.68);
  s.log_order_stat = j.value("order_stat_mode", std::string("exact")) == std::string("log");
  return s;
}

struct Strategy {
  enum class Kind { coded, uncoded, replication, lt_fine, lt_coarse };
  Kind kind = Kind::coded;
  int k = 0;       // coded: 0 picks k_circ; lt_coarse: k_s
  int copies = 2;  // replication

  static Strategy coded(int k) { return {Kind::coded, k, 2}; }
  static Strategy uncoded() { return {Kind::uncoded, 0, 2}; }
  static Strategy replication() { return {Kind::replication, 0, 2}; }
  static Strategy lt_fine() { return {Kind::lt_fine, 0, 2}; }
  static Strategy lt_coarse(int k_s) { return {Kind::lt_coarse, k_s, 2}; }

  std::string label() const {
    switch (kind) {
      case Kind::coded: return "coded";
      case Kind::uncoded: return "uncoded";
      case Kind::replication: return "replication";
      case Kind::lt_fine: return "lt_fine";
      case Kind::lt_coarse: return "lt_coarse";
    }
    return "?";
  }
};

inline Strategy strategy_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "coded") return Strategy::coded(j.value("k", 0));
  if (type == "uncoded") return Strategy::uncoded();
  if (type == "replication") return Strategy::replication();
  if (type == "lt_fine") return Strategy::lt_fine();
  if (type == "lt_coarse") return Strategy::lt_coarse(j.value("k", 0));
  throw std::invalid_argument("unknown strategy type: " + type);
}

struct TrialResult {
  double total_s = 0, enc_s = 0, exec_s = 0, dec_s = 0;
  std::vector<double> worker_completion_s;
  int retries = 0;
  bool failed = false;
};

struct SummaryStats {
  std::string strategy;
  int k = 0;
  std::size_t trials = 0;
  double mean_s = 0, std_s = 0, p50_s = 0, p95_s = 0, fail_rate = 0;
  double mean_enc_s = 0, mean_exec_s = 0, mean_dec_s = 0;
};

namespace detail {

// shift/scale pairs of every phase at one strategy's piece sizes
struct PhaseScales {
  double enc_sh = 0, enc_sc = 0;
  double rec_sh = 0, rec_sc = 0;
  double cmp_sh = 0, cmp_sc = 0;
  double sen_sh = 0, sen_sc = 0;
  double dec_sh = 0, dec_sc = 0;

  double worker_mean() const {
    return rec_sh + rec_sc + cmp_sh + cmp_sc + sen_sh + sen_sc;
  }
};

inline PhaseScales phase_scales(const WorkloadSizes& s, const PhaseProfile& pf) {
  PhaseScales ps;
  ps.enc_sh = s.n_enc * pf.theta_m;
  ps.enc_sc = s.n_enc / pf.mu_m;
  ps.rec_sh = s.n_rec * pf.theta_rec;
  ps.rec_sc = s.n_rec / pf.mu_rec;
  ps.cmp_sh = s.n_cmp * pf.theta_cmp;
  ps.cmp_sc = s.n_cmp / pf.mu_cmp;
  ps.sen_sh = s.n_sen * pf.theta_sen;
  ps.sen_sc = s.n_sen / pf.mu_sen;
  ps.dec_sh = s.n_dec * pf.theta_m;
  ps.dec_sc = s.n_dec / pf.mu_m;
  return ps;
}

// floored piece sizes of a k-way split of the layer (the simulator never
// relaxes; the optimizer does)
inline WorkloadSizes strategy_sizes(const LayerGeometry& g, int k, int n) {
  const SplitPlan plan = plan_split(g.kernel, g.stride, g.w_in, k);
  return workload_sizes(g, plan, n);
}

struct TrialScratch {
  std::vector<int> perm;        // worker index permutation buffer
  std::vector<char> failed;     // per-worker failed flags
  std::vector<double> t;        // per-worker completion times
  std::vector<double> sorted;   // order-stat scratch
};

// per-trial scenario picks; draw order is part of the contract (determinism)
struct ScenarioDraw {
  int straggler = -1;
  int n_failed = 0;
};

inline ScenarioDraw draw_scenario(const ScenarioConfig& sc, int n, SplitMix64& rng,
                                  TrialScratch& scratch) {
  ScenarioDraw d;
  std::fill(scratch.failed.begin(), scratch.failed.end(), 0);
  if (sc.kind == ScenarioKind::failure || sc.kind == ScenarioKind::straggle_and_fail) {
    if (static_cast<int>(scratch.perm.size()) != n) {
      scratch.perm.resize(n);
      std::iota(scratch.perm.begin(), scratch.perm.end(), 0);
    }
    for (int i = 0; i < sc.n_f; ++i) {
      std::uint32_t j = i + rng.next_below(static_cast<std::uint32_t>(n - i));
      std::swap(scratch.perm[i], scratch.perm[j]);
      scratch.failed[scratch.perm[i]] = 1;
    }
    d.n_failed = sc.n_f;
  }
  if (sc.kind == ScenarioKind::straggle_and_fail)
    d.straggler = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(n)));
  return d;
}

// one worker's rec+cmp+sen completion; lambda delays only in scenario 1
inline double draw_worker(const PhaseScales& ps, const ScenarioConfig& sc, bool slow,
                          SplitMix64& rng) {
  double t = ps.rec_sh + ps.rec_sc * rng.next_exponential();
  double cmp = ps.cmp_sh + ps.cmp_sc * rng.next_exponential();
  if (slow) cmp *= sc.slow_factor;
  t += cmp;
  t += ps.sen_sh + ps.sen_sc * rng.next_exponential();
  if (sc.kind == ScenarioKind::straggling && sc.lambda_tr > 0) {
    t += sc.lambda_tr * (ps.rec_sh + ps.rec_sc) * rng.next_exponential();
    t += sc.lambda_tr * (ps.sen_sh + ps.sen_sc) * rng.next_exponential();
  }
  return t;
}

// log-matched order-statistic execution draw: each phase's k-th order stat of
// n unit exponentials is rescaled so its mean is ln(n/(n-k)) (ln n at k = n),
// making the Monte Carlo estimator converge to the log-approximated closed
// forms; used only for verification studies
inline double draw_exec_log_matched(const PhaseScales& ps, int n, int k, SplitMix64& rng,
                                    TrialScratch& scratch) {
  const double hdiff = harmonic(n) - harmonic(n - k);
  const double target = (k < n) ? std::log(static_cast<double>(n) / (n - k))
                                : std::log(static_cast<double>(n));
  const double rescale = (hdiff > 0) ? target / hdiff : 0.0;
  double total = ps.rec_sh + ps.cmp_sh + ps.sen_sh;
  for (double scale : {ps.rec_sc, ps.cmp_sc, ps.sen_sc}) {
    scratch.sorted.resize(n);
    for (int i = 0; i < n; ++i) scratch.sorted[i] = rng.next_exponential();
    std::nth_element(scratch.sorted.begin(), scratch.sorted.begin() + (k - 1),
                     scratch.sorted.end());
    total += scale * scratch.sorted[k - 1] * rescale;
  }
  return total;
}

inline double auto_timeout(const PhaseScales& ps) { return 5.0 * ps.worker_mean(); }

}  // namespace detail

// number of coded pieces a strategy actually splits into for a given layer
inline int strategy_k(const Strategy& st, const SystemParams& params) {
  const int w_out = params.layer.w_out;
  switch (st.kind) {
    case Strategy::Kind::coded: {
      int k = st.k;
      if (k <= 0) k = minimize_L(params).k_circ;
      return std::min(k, std::min(params.n - 1, w_out));
    }
    case Strategy::Kind::uncoded:
      return std::min(params.n, w_out);
    case Strategy::Kind::replication:
      return std::max(1, std::min(params.n / 2, w_out));
    case Strategy::Kind::lt_fine:
      return w_out;
    case Strategy::Kind::lt_coarse: {
      int k = st.k > 0 ? st.k : params.n;
      return std::min(k, w_out);
    }
  }
  return 1;
}

// One full trial of one layer under one strategy. rng must be dedicated to
// this trial; draw order is fixed so identical seeds give identical results.
inline TrialResult simulate_layer_trial(const Strategy& st, const SystemParams& params,
                                        const ScenarioConfig& scenario, int k,
                                        SplitMix64& rng, detail::TrialScratch& scratch) {
  const int n = params.n;
  const PhaseProfile& pf = params.profile;
  TrialResult res;
  scratch.failed.assign(n, 0);
  const detail::ScenarioDraw sd = detail::draw_scenario(scenario, n, rng, scratch);

  const WorkloadSizes sizes = detail::strategy_sizes(params.layer, k, n);
  const detail::PhaseScales ps = detail::phase_scales(sizes, pf);

  switch (st.kind) {
    case Strategy::Kind::coded: {
      res.enc_s = ps.enc_sh + ps.enc_sc * rng.next_exponential();
      if (scenario.log_order_stat) {
        res.exec_s = detail::draw_exec_log_matched(ps, n, k, rng, scratch);
      } else {
        scratch.t.clear();
        res.worker_completion_s.resize(n);
        for (int i = 0; i < n; ++i) {
          const double t = detail::draw_worker(ps, scenario, i == sd.straggler, rng);
          res.worker_completion_s[i] = t;
          if (!scratch.failed[i]) scratch.t.push_back(t);
        }
        if (static_cast<int>(scratch.t.size()) < k) {
          res.failed = true;  // decode failure: not enough survivors
          res.dec_s = 0;
          res.total_s = std::numeric_limits<double>::quiet_NaN();
          return res;
        }
        std::nth_element(scratch.t.begin(), scratch.t.begin() + (k - 1), scratch.t.end());
        res.exec_s = scratch.t[k - 1];
      }
      res.dec_s = ps.dec_sh + ps.dec_sc * rng.next_exponential();
      break;
    }
    case Strategy::Kind::uncoded: {
      // n equal pieces, no coding; failed subtasks re-dispatched once at the
      // timeout to a finished worker, a second miss fails the trial
      if (scenario.log_order_stat) {
        res.exec_s = detail::draw_exec_log_matched(ps, n, n, rng, scratch);
        break;
      }
      res.worker_completion_s.resize(n);
      double mx = 0.0;
      int alive = 0;
      for (int i = 0; i < n; ++i) {
        const double t = detail::draw_worker(ps, scenario, i == sd.straggler, rng);
        res.worker_completion_s[i] = t;
        if (!scratch.failed[i]) {
          if (t > mx) mx = t;
          ++alive;
        }
      }
      if (alive == 0) {
        res.failed = true;
        res.total_s = std::numeric_limits<double>::quiet_NaN();
        return res;
      }
      const double timeout =
          scenario.timeout_s > 0 ? scenario.timeout_s : detail::auto_timeout(ps);
      for (int i = 0; i < n; ++i) {
        if (!scratch.failed[i]) continue;
        // re-execution by an already-finished worker, baseline speed
        const double redo = detail::draw_worker(ps, scenario, false, rng);
        const double done = timeout + redo;
        if (done > mx) mx = done;
        ++res.retries;
      }
      res.exec_s = mx;
      break;
    }
    case Strategy::Kind::replication: {
      // floor(n/2) subtasks, two copies each; odd leftover worker sits idle
      const int pairs = k;  // strategy_k returned floor(n/2) (clamped)
      res.worker_completion_s.resize(n);
      for (int i = 0; i < n; ++i)
        res.worker_completion_s[i] = detail::draw_worker(ps, scenario, i == sd.straggler, rng);
      double mx = 0.0;
      for (int j = 0; j < pairs; ++j) {
        const int a = 2 * j, b = 2 * j + 1;
        double best = std::numeric_limits<double>::infinity();
        if (b < n) {
          if (!scratch.failed[a]) best = res.worker_completion_s[a];
          if (!scratch.failed[b]) best = std::min(best, res.worker_completion_s[b]);
        } else if (!scratch.failed[a]) {
          best = res.worker_completion_s[a];
        }
        if (!std::isfinite(best)) {
          res.failed = true;  // both copies lost
          res.total_s = std::numeric_limits<double>::quiet_NaN();
          return res;
        }
        if (best > mx) mx = best;
      }
      res.exec_s = mx;
      break;
    }
    case Strategy::Kind::lt_fine:
    case Strategy::Kind::lt_coarse: {
      // workers stream rateless symbols at i.i.d. shift-exponential intervals
      // scaled to the per-symbol workload; the master decodes at GF(2) rank k
      const DegreeDist dist = robust_soliton(k);
      std::vector<std::vector<std::uint64_t>> basis(k);
      std::vector<int> pick(k);
      std::iota(pick.begin(), pick.end(), 0);
      using Ev = std::pair<double, int>;
      std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> heap;
      for (int i = 0; i < n; ++i) {
        if (scratch.failed[i]) continue;
        heap.emplace(detail::draw_worker(ps, scenario, i == sd.straggler, rng), i);
      }
      if (heap.empty()) {
        res.failed = true;
        res.total_s = std::numeric_limits<double>::quiet_NaN();
        return res;
      }
      int rank = 0;
      double now = 0.0;
      while (rank < k) {
        Ev ev = heap.top();
        heap.pop();
        now = ev.first;
        const int d = dist.sample(rng);
        for (int i = 0; i < d; ++i) {
          std::uint32_t j = i + rng.next_below(static_cast<std::uint32_t>(k - i));
          std::swap(pick[i], pick[j]);
        }
        std::vector<std::uint64_t> mask(detail::mask_words(k), 0);
        for (int i = 0; i < d; ++i) detail::set_bit(mask, pick[i]);
        while (true) {
          int piv = detail::highest_bit(mask);
          if (piv < 0) break;
          if (basis[piv].empty()) {
            basis[piv] = std::move(mask);
            ++rank;
            break;
          }
          for (std::size_t w = 0; w < mask.size(); ++w) mask[w] ^= basis[piv][w];
        }
        heap.emplace(now + detail::draw_worker(ps, scenario, ev.second == sd.straggler, rng),
                     ev.second);
      }
      res.exec_s = now;
      res.dec_s = ps.dec_sh + ps.dec_sc * rng.next_exponential();
      break;
    }
  }
  res.total_s = res.enc_s + res.exec_s + res.dec_s;
  return res;
}

inline std::vector<TrialResult> simulate_layer_trials(const Strategy& st,
                                                      const SystemParams& params,
                                                      const ScenarioConfig& scenario,
                                                      std::size_t trials, std::uint64_t seed) {
  params.validate();
  scenario.validate(params.n);
  if (trials < 1) throw std::invalid_argument("need trials >= 1");
  const int k = strategy_k(st, params);
  std::vector<TrialResult> out;
  out.reserve(trials);
  detail::TrialScratch scratch;
  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng(mix_seed(seed, t));
    out.push_back(simulate_layer_trial(st, params, scenario, k, rng, scratch));
  }
  return out;
}

inline SummaryStats summarize(const std::vector<TrialResult>& trials, const std::string& label,
                              int k) {
  SummaryStats s;
  s.strategy = label;
  s.k = k;
  s.trials = trials.size();
  std::vector<double> ok;
  ok.reserve(trials.size());
  double sum = 0, sum2 = 0, enc = 0, exec = 0, dec = 0;
  for (const auto& t : trials) {
    if (t.failed) continue;
    ok.push_back(t.total_s);
    sum += t.total_s;
    sum2 += t.total_s * t.total_s;
    enc += t.enc_s;
    exec += t.exec_s;
    dec += t.dec_s;
  }
  s.fail_rate = trials.empty() ? 0.0
                               : static_cast<double>(trials.size() - ok.size()) / trials.size();
  if (ok.empty()) {
    s.mean_s = s.std_s = s.p50_s = s.p95_s = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const double m = sum / ok.size();
  s.mean_s = m;
  s.std_s = ok.size() > 1 ? std::sqrt(std::max(0.0, (sum2 - ok.size() * m * m) / (ok.size() - 1)))
                          : 0.0;
  s.mean_enc_s = enc / ok.size();
  s.mean_exec_s = exec / ok.size();
  s.mean_dec_s = dec / ok.size();
  auto pct = [&ok](double q) {
    std::size_t idx = static_cast<std::size_t>(q * (ok.size() - 1));
    std::nth_element(ok.begin(), ok.begin() + idx, ok.end());
    return ok[idx];
  };
  s.p50_s = pct(0.50);
  s.p95_s = pct(0.95);
  return s;
}

inline SummaryStats simulate_layer(const Strategy& st, const SystemParams& params,
                                   const ScenarioConfig& scenario, std::size_t trials,
                                   std::uint64_t seed) {
  const int k = strategy_k(st, params);
  return summarize(simulate_layer_trials(st, params, scenario, trials, seed), st.label(), k);
}

struct EmpiricalOptimum {
  int k_star = 1;
  double confidence = 1.0;          // bootstrap P(best beats runner-up)
  std::vector<double> mean_by_k;    // index k-1; NaN where infeasible
};

// Empirical argmin over k of mean coded latency with common random numbers:
// the same unit exponential draws feed every k, so the argmin comparison is
// paired. Draw order per trial: scenario picks, enc, per worker
// (rec, cmp, sen [, delays]), dec.
inline EmpiricalOptimum empirical_optimal_k(const SystemParams& params,
                                            const ScenarioConfig& scenario, std::size_t trials,
                                            std::uint64_t seed) {
  params.validate();
  scenario.validate(params.n);
  const int n = params.n;
  const int k_max = std::min(n - 1, params.layer.w_out);
  if (k_max < 1) throw std::invalid_argument("no feasible k");
  std::vector<detail::PhaseScales> ps(k_max + 1);
  for (int k = 1; k <= k_max; ++k)
    ps[k] = detail::phase_scales(detail::strategy_sizes(params.layer, k, n), params.profile);

  std::vector<double> sum(k_max + 1, 0.0);
  std::vector<std::size_t> cnt(k_max + 1, 0);
  std::vector<double> e_rec(n), e_cmp(n), e_sen(n), d_rec(n), d_sen(n);
  std::vector<char> failed(n);
  std::vector<double> t(n);
  detail::TrialScratch scratch;
  scratch.failed.assign(n, 0);

  const bool delays = scenario.kind == ScenarioKind::straggling && scenario.lambda_tr > 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    SplitMix64 rng(mix_seed(seed, trial));
    const detail::ScenarioDraw sd = detail::draw_scenario(scenario, n, rng, scratch);
    for (int i = 0; i < n; ++i) failed[i] = scratch.failed[i];
    const double e_enc = rng.next_exponential();
    for (int i = 0; i < n; ++i) {
      e_rec[i] = rng.next_exponential();
      e_cmp[i] = rng.next_exponential();
      e_sen[i] = rng.next_exponential();
      if (delays) {
        d_rec[i] = rng.next_exponential();
        d_sen[i] = rng.next_exponential();
      }
    }
    const double e_dec = rng.next_exponential();

    for (int k = 1; k <= k_max; ++k) {
      const detail::PhaseScales& p = ps[k];
      int alive = 0;
      for (int i = 0; i < n; ++i) {
        if (failed[i]) continue;
        double cmp = p.cmp_sh + p.cmp_sc * e_cmp[i];
        if (i == sd.straggler) cmp *= scenario.slow_factor;
        double w = p.rec_sh + p.rec_sc * e_rec[i] + cmp + p.sen_sh + p.sen_sc * e_sen[i];
        if (delays)
          w += scenario.lambda_tr * ((p.rec_sh + p.rec_sc) * d_rec[i] +
                                     (p.sen_sh + p.sen_sc) * d_sen[i]);
        t[alive++] = w;
      }
      if (alive < k) continue;  // decode failure at this k
      std::nth_element(t.begin(), t.begin() + (k - 1), t.begin() + alive);
      const double total = p.enc_sh + p.enc_sc * e_enc + t[k - 1] + p.dec_sh + p.dec_sc * e_dec;
      sum[k] += total;
      ++cnt[k];
    }
  }

  EmpiricalOptimum res;
  res.mean_by_k.assign(k_max, std::numeric_limits<double>::quiet_NaN());
  int best = -1;
  for (int k = 1; k <= k_max; ++k) {
    if (cnt[k] == 0) continue;
    res.mean_by_k[k - 1] = sum[k] / cnt[k];
    if (best < 0 || res.mean_by_k[k - 1] < res.mean_by_k[best - 1]) best = k;
  }
  if (best < 0) throw std::runtime_error("all trials failed at every k");
  res.k_star = best;

  // paired bootstrap of best vs runner-up over per-trial differences
  int runner = -1;
  for (int k = 1; k <= k_max; ++k) {
    if (k == best || cnt[k] == 0) continue;
    if (runner < 0 || res.mean_by_k[k - 1] < res.mean_by_k[runner - 1]) runner = k;
  }
  if (runner > 0) {
    std::vector<double> diff;
    diff.reserve(trials);
    for (std::size_t trial = 0; trial < trials; ++trial) {
      SplitMix64 rng(mix_seed(seed, trial));
      const detail::ScenarioDraw sd = detail::draw_scenario(scenario, n, rng, scratch);
      for (int i = 0; i < n; ++i) failed[i] = scratch.failed[i];
      const double e_enc = rng.next_exponential();
      for (int i = 0; i < n; ++i) {
        e_rec[i] = rng.next_exponential();
        e_cmp[i] = rng.next_exponential();
        e_sen[i] = rng.next_exponential();
        if (delays) {
          d_rec[i] = rng.next_exponential();
          d_sen[i] = rng.next_exponential();
        }
      }
      const double e_dec = rng.next_exponential();
      double pair_total[2] = {0, 0};
      bool pair_ok = true;
      const int ks[2] = {best, runner};
      for (int which = 0; which < 2; ++which) {
        const detail::PhaseScales& p = ps[ks[which]];
        int alive = 0;
        for (int i = 0; i < n; ++i) {
          if (failed[i]) continue;
          double cmp = p.cmp_sh + p.cmp_sc * e_cmp[i];
          if (i == sd.straggler) cmp *= scenario.slow_factor;
          double w = p.rec_sh + p.rec_sc * e_rec[i] + cmp + p.sen_sh + p.sen_sc * e_sen[i];
          if (delays)
            w += scenario.lambda_tr * ((p.rec_sh + p.rec_sc) * d_rec[i] +
                                       (p.sen_sh + p.sen_sc) * d_sen[i]);
          t[alive++] = w;
        }
        if (alive < ks[which]) {
          pair_ok = false;
          break;
        }
        std::nth_element(t.begin(), t.begin() + (ks[which] - 1), t.begin() + alive);
        pair_total[which] =
            p.enc_sh + p.enc_sc * e_enc + t[ks[which] - 1] + p.dec_sh + p.dec_sc * e_dec;
      }
      if (pair_ok) diff.push_back(pair_total[0] - pair_total[1]);
    }
    if (!diff.empty()) {
      SplitMix64 boot(mix_seed(seed, 0x626f6f74ull));
      const int resamples = 200;
      int wins = 0;
      for (int r = 0; r < resamples; ++r) {
        double s = 0;
        for (std::size_t i = 0; i < diff.size(); ++i)
          s += diff[boot.next_below(static_cast<std::uint32_t>(diff.size()))];
        if (s < 0) ++wins;
      }
      res.confidence = static_cast<double>(wins) / resamples;
    }
  }
  return res;
}

// One stage of a model pipeline: distributed conv (type-1) or master-local
// work at a flat FLOP count (type-2).
struct PipelineLayer {
  bool distributed = false;
  LayerGeometry geom;
  double flops = 0;
  std::string name;
};

// Sum of per-layer latencies. Failures and the straggler are drawn once per
// trial and persist across layers; coded k is chosen per layer (fixed k is
// clamped to each layer's feasible range, k = 0 uses the optimizer).
inline SummaryStats simulate_pipeline(const std::vector<PipelineLayer>& layers, int n,
                                      const PhaseProfile& profile, const Strategy& st,
                                      const ScenarioConfig& scenario, std::size_t trials,
                                      std::uint64_t seed) {
  if (layers.empty()) throw std::invalid_argument("layer list is empty");
  scenario.validate(n);
  // per-layer k decided up front
  std::vector<int> layer_k(layers.size(), 0);
  std::vector<SystemParams> layer_params(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    if (!layers[li].distributed) continue;
    SystemParams p;
    p.n = n;
    p.layer = layers[li].geom;
    p.profile = profile;
    layer_params[li] = p;
    layer_k[li] = strategy_k(st, p);
  }

  std::vector<TrialResult> results;
  results.reserve(trials);
  detail::TrialScratch scratch;
  scratch.failed.assign(n, 0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    SplitMix64 trial_rng(mix_seed(seed, trial));
    const detail::ScenarioDraw sd = detail::draw_scenario(scenario, n, trial_rng, scratch);
    std::vector<char> failed(scratch.failed.begin(), scratch.failed.end());
    TrialResult agg;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      SplitMix64 rng(mix_seed(trial_rng.next_u64(), li));
      if (!layers[li].distributed) {
        const double t =
            layers[li].flops * profile.theta_m + layers[li].flops / profile.mu_m * rng.next_exponential();
        agg.exec_s += t;
        agg.total_s += t;
        continue;
      }
      // per-layer scenario with the shared picks: re-use failed/straggler by
      // running the single-layer trial with a pinned scenario draw
      const SystemParams& p = layer_params[li];
      const WorkloadSizes sizes = detail::strategy_sizes(p.layer, layer_k[li], n);
      const detail::PhaseScales ps = detail::phase_scales(sizes, profile);
      TrialResult lr;
      switch (st.kind) {
        case Strategy::Kind::coded: {
          lr.enc_s = ps.enc_sh + ps.enc_sc * rng.next_exponential();
          std::vector<double>& t = scratch.t;
          t.clear();
          for (int i = 0; i < n; ++i) {
            const double w = detail::draw_worker(ps, scenario, i == sd.straggler, rng);
            if (!failed[i]) t.push_back(w);
          }
          if (static_cast<int>(t.size()) < layer_k[li]) {
            lr.failed = true;
            break;
          }
          std::nth_element(t.begin(), t.begin() + (layer_k[li] - 1), t.end());
          lr.exec_s = t[layer_k[li] - 1];
          lr.dec_s = ps.dec_sh + ps.dec_sc * rng.next_exponential();
          break;
        }
        case Strategy::Kind::uncoded: {
          double mx = 0.0;
          int alive = 0;
          for (int i = 0; i < n; ++i) {
            const double w = detail::draw_worker(ps, scenario, i == sd.straggler, rng);
            if (!failed[i]) {
              if (w > mx) mx = w;
              ++alive;
            }
          }
          if (alive == 0) {
            lr.failed = true;
            break;
          }
          const double timeout =
              scenario.timeout_s > 0 ? scenario.timeout_s : detail::auto_timeout(ps);
          for (int i = 0; i < n; ++i) {
            if (!failed[i]) continue;
            const double done = timeout + detail::draw_worker(ps, scenario, false, rng);
            if (done > mx) mx = done;
            ++lr.retries;
          }
          lr.exec_s = mx;
          break;
        }
        default:
          throw std::invalid_argument("pipeline simulation supports coded and uncoded");
      }
      if (lr.failed) {
        agg.failed = true;
        break;
      }
      agg.enc_s += lr.enc_s;
      agg.exec_s += lr.exec_s;
      agg.dec_s += lr.dec_s;
      agg.retries += lr.retries;
      agg.total_s += lr.enc_s + lr.exec_s + lr.dec_s;
    }
    if (agg.failed) agg.total_s = std::numeric_limits<double>::quiet_NaN();
    results.push_back(std::move(agg));
  }
  return summarize(results, st.label(), st.k);
}

}  // namespace cocoi
