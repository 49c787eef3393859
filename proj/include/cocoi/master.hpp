#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "cocoi/latency.hpp"
#include "cocoi/log.hpp"
#include "cocoi/mds.hpp"
#include "cocoi/model.hpp"
#include "cocoi/net.hpp"
#include "cocoi/optimize.hpp"
#include "cocoi/split.hpp"
#include "cocoi/tensor.hpp"
#include "cocoi/wire.hpp"

namespace cocoi {

struct WorkerEndpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

struct ExecOptions {
  int k = 0;                           // 0 = per-layer optimizer choice
  bool uncoded = false;                // n equal pieces, no redundancy
  double timeout_s = 0;                // 0 = auto (5x predicted mean subtask)
  std::optional<PhaseProfile> profile; // enables auto k and auto timeout
};

struct PhaseTiming {
  std::string layer;
  std::string phase;  // enc | exec | dec | local
  double seconds = 0;
};

struct MasterReport {
  Tensor4 output{};
  std::vector<PhaseTiming> timing;
  double total_s = 0;
};

namespace detail {

inline double predicted_subtask_mean(const WorkloadSizes& s, const PhaseProfile& pf) {
  return s.n_rec * pf.theta_rec + s.n_rec / pf.mu_rec + s.n_cmp * pf.theta_cmp +
         s.n_cmp / pf.mu_cmp + s.n_sen * pf.theta_sen + s.n_sen / pf.mu_sen;
}

inline double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace detail

// Connection pool to n workers plus the result coordinator. Sessions each own
// a reader thread; all coordination state lives behind one mutex and sessions
// only deliver messages into it.
class MasterCluster {
 public:
  explicit MasterCluster(const std::vector<WorkerEndpoint>& endpoints,
                         double hello_timeout_s = 10.0) {
    if (endpoints.empty()) throw std::invalid_argument("no worker endpoints");
    std::vector<std::string> unreachable;
    for (const auto& ep : endpoints) {
      auto s = std::make_unique<Session>();
      try {
        s->sock = connect_to(ep.host, ep.port);
      } catch (const ProtocolError&) {
        unreachable.push_back(ep.host + ":" + std::to_string(ep.port));
        continue;
      }
      sessions_.push_back(std::move(s));
    }
    if (!unreachable.empty()) {
      std::string msg = "unreachable workers:";
      for (const auto& u : unreachable) msg += " " + u;
      throw ProtocolError(msg);
    }
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      Session& s = *sessions_[i];
      Message hello;
      // handshake is synchronous; reader threads start afterwards
      s.sock.set_recv_timeout(hello_timeout_s);
      if (!recv_message(s.sock, hello) || !std::holds_alternative<HelloMsg>(hello))
        throw ProtocolError("worker " + std::to_string(i) + " did not send Hello");
      s.sock.set_recv_timeout(0);
      s.worker_id = std::get<HelloMsg>(hello).worker_id;
    }
    for (std::size_t i = 0; i < sessions_.size(); ++i)
      sessions_[i]->reader = std::thread([this, i] { read_loop(static_cast<int>(i)); });
  }

  ~MasterCluster() {
    for (auto& s : sessions_) s->sock.shutdown_both();
    for (auto& s : sessions_) {
      if (s->reader.joinable()) s->reader.join();
      s->sock.close();
    }
  }

  MasterCluster(const MasterCluster&) = delete;
  MasterCluster& operator=(const MasterCluster&) = delete;

  int n() const { return static_cast<int>(sessions_.size()); }

  int alive_count() const {
    int c = 0;
    for (const auto& s : sessions_)
      if (!s->dead.load()) ++c;
    return c;
  }

  void load_layer(std::uint32_t layer_id, const ConvSpec& spec) {
    for (auto& s : sessions_)
      if (!s->dead.load()) send_to(*s, LoadLayerMsg{layer_id, spec});
  }

  // Coded width-split execution: encode, fan out, await any k results,
  // cancel stragglers, decode; one re-dispatch round covers timeouts and
  // worker deaths. Remainder strip and bias are computed master-side.
  Tensor4 execute_layer_distributed(std::uint32_t layer_id, const ConvSpec& spec,
                                    const Tensor4& input, int k, const ExecOptions& opts,
                                    PhaseTiming* enc_t = nullptr, PhaseTiming* exec_t = nullptr,
                                    PhaseTiming* dec_t = nullptr) {
    const int nw = n();
    if (k < 1) throw std::invalid_argument("need k >= 1");
    if (k >= nw && !opts.uncoded)
      throw std::invalid_argument("k = n has no redundancy; run uncoded mode instead");

    const double t_enc0 = detail::now_s();
    const Tensor4 padded = spec.padding > 0 ? pad(input, spec.padding) : input;
    if (opts.uncoded)
      k = std::min(nw, output_extent(static_cast<int>(padded.w()), spec.kernel, spec.stride));
    const SplitPlan plan = plan_split(spec.kernel, spec.stride, padded.w(), k);
    const ConvSpecd dspec = convert_spec<double>(spec);

    // per-piece encoded inputs (identity pieces in uncoded mode)
    std::vector<Tensor4> pieces(static_cast<std::size_t>(nw));
    const Dims4 piece_dims{padded.b(), padded.c(), padded.h(),
                           static_cast<std::uint32_t>(plan.pieces.front().w_in())};
    if (opts.uncoded) {
      for (int j = 0; j < k; ++j) {
        const PieceRange& pr = plan.pieces[static_cast<std::size_t>(j)];
        pieces[static_cast<std::size_t>(j)] = slice_width(padded, pr.a_in, pr.b_in);
      }
    } else {
      std::vector<std::vector<double>> parts(static_cast<std::size_t>(k));
      for (int j = 0; j < k; ++j) {
        const PieceRange& pr = plan.pieces[static_cast<std::size_t>(j)];
        parts[static_cast<std::size_t>(j)] =
            flatten(convert<double>(slice_width(padded, pr.a_in, pr.b_in)));
      }
      const GenerationMatrix g = build_vandermonde(nw, k);
      std::vector<std::vector<double>> coded = mds_encode(g, parts);
      for (int i = 0; i < nw; ++i)
        pieces[static_cast<std::size_t>(i)] = convert<float>(
            restore(std::move(coded[static_cast<std::size_t>(i)]), piece_dims));
    }
    const double t_enc1 = detail::now_s();

    // fan out one subtask per worker (row i of the generator)
    const std::uint64_t task_id = next_task_id_++;
    Collect collect;
    collect.task_id = task_id;
    collect.need = k;
    collect.out_dims =
        Dims4{padded.b(), static_cast<std::uint32_t>(spec.out_channels),
              static_cast<std::uint32_t>(
                  output_extent(static_cast<int>(padded.h()), spec.kernel, spec.stride)),
              static_cast<std::uint32_t>(plan.pieces.front().w_out())};
    {
      std::lock_guard<std::mutex> lock(mx_);
      active_ = &collect;
    }
    std::vector<int> row_session(static_cast<std::size_t>(nw), -1);
    for (int i = 0; i < nw; ++i) {
      if (sessions_[static_cast<std::size_t>(i)]->dead.load()) continue;
      if (opts.uncoded && i >= k) break;  // uncoded uses exactly k = n pieces
      send_to(*sessions_[static_cast<std::size_t>(i)],
              TaskAssignMsg{task_id, layer_id, static_cast<std::uint32_t>(i),
                            pieces[static_cast<std::size_t>(i)]});
      row_session[static_cast<std::size_t>(i)] = i;
    }

    // remainder strip while workers run
    std::optional<Tensor4d> remainder_out;
    if (plan.remainder) {
      const PieceRange& pr = *plan.remainder;
      remainder_out =
          conv2d(convert<double>(slice_width(padded, pr.a_in, pr.b_in)), dspec, false);
    }

    const double timeout = resolve_timeout(spec, plan, k, padded.h(), opts);
    const auto deadline1 =
        std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(timeout));

    // round 1: wait for k results, waking early if deaths make that impossible
    wait_for_results(collect, row_session, deadline1);

    if (static_cast<int>(collect.got.size()) < k) {
      // redispatch missing rows to finished (idle) workers, one round
      redispatch_missing(collect, row_session, task_id, layer_id, pieces, k);
      const auto deadline2 =
          std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(timeout));
      wait_for_results(collect, row_session, deadline2);
    }

    std::vector<std::uint32_t> rows;
    std::map<std::uint32_t, Tensor4> got;
    int cancels = 0;
    {
      std::lock_guard<std::mutex> lock(mx_);
      active_ = nullptr;
      rows = collect.arrival_order;
      got = std::move(collect.got);
    }
    if (static_cast<int>(rows.size()) < k) {
      std::string missing = "layer " + std::to_string(layer_id) + ": missing subtasks after retry:";
      for (int i = 0; i < nw; ++i)
        if (!got.count(static_cast<std::uint32_t>(i)) && (!opts.uncoded || i < k))
          missing += " " + std::to_string(i);
      throw LayerFailure(missing);
    }
    // cancel workers still computing a now-useless subtask
    for (int i = 0; i < nw; ++i) {
      Session& s = *sessions_[static_cast<std::size_t>(i)];
      if (s.dead.load()) continue;
      bool pending = false;
      for (int r = 0; r < nw; ++r)
        if (row_session[static_cast<std::size_t>(r)] == i &&
            !got.count(static_cast<std::uint32_t>(r)))
          pending = true;
      if (pending) {
        send_to(s, CancelMsg{task_id});
        ++cancels;
      }
    }
    last_cancel_count_ = cancels;
    const double t_exec1 = detail::now_s();

    // decode the first k arrivals
    rows.resize(static_cast<std::size_t>(k));
    Tensor4d assembled = [&] {
      if (opts.uncoded) {
        std::vector<Tensor4d> outs(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j)
          outs[static_cast<std::size_t>(j)] =
              convert<double>(got.at(static_cast<std::uint32_t>(j)));
        if (remainder_out) outs.push_back(std::move(*remainder_out));
        return concat_width(outs);
      }
      const GenerationMatrix g = build_vandermonde(nw, k);
      std::vector<int> subset(rows.begin(), rows.end());
      std::vector<std::vector<double>> outputs;
      outputs.reserve(static_cast<std::size_t>(k));
      for (std::uint32_t r : rows) outputs.push_back(flatten(convert<double>(got.at(r))));
      std::vector<std::vector<double>> decoded = mds_decode(g, subset, outputs);
      std::vector<Tensor4d> outs(static_cast<std::size_t>(k));
      for (int j = 0; j < k; ++j)
        outs[static_cast<std::size_t>(j)] =
            restore(std::move(decoded[static_cast<std::size_t>(j)]), collect.out_dims);
      if (remainder_out) outs.push_back(std::move(*remainder_out));
      return concat_width(outs);
    }();

    Tensor4 result = [&] {
      if (spec.bias.empty()) return convert<float>(assembled);
      std::vector<double> buf = assembled.data();
      const Dims4 d = assembled.dims();
      const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
      std::size_t idx = 0;
      for (std::uint32_t b = 0; b < d.b; ++b)
        for (std::uint32_t c = 0; c < d.c; ++c) {
          const double bias = spec.bias[c];
          for (std::size_t i = 0; i < hw; ++i) buf[idx++] += bias;
        }
      return convert<float>(Tensor4d(d, std::move(buf)));
    }();
    const double t_dec1 = detail::now_s();

    if (enc_t) enc_t->seconds = t_enc1 - t_enc0;
    if (exec_t) exec_t->seconds = t_exec1 - t_enc1;
    if (dec_t) dec_t->seconds = t_dec1 - t_exec1;
    return result;
  }

  int last_cancel_count() const { return last_cancel_count_; }

 private:
  struct Session {
    Socket sock;
    std::thread reader;
    std::mutex send_mx;
    std::atomic<bool> dead{false};
    std::uint32_t worker_id = 0;
  };

  struct Collect {
    std::uint64_t task_id = 0;
    int need = 0;
    Dims4 out_dims{};
    std::map<std::uint32_t, Tensor4> got;       // subtask row -> output piece
    std::vector<std::uint32_t> arrival_order;   // rows in arrival order
    std::vector<int> finished_sessions;         // sessions free for redispatch
  };

  void send_to(Session& s, const Message& m) {
    std::lock_guard<std::mutex> lock(s.send_mx);
    try {
      send_message(s.sock, m);
    } catch (const ProtocolError&) {
      mark_dead(s);
    }
  }

  void mark_dead(Session& s) {
    if (!s.dead.exchange(true)) {
      std::lock_guard<std::mutex> lock(mx_);
      cv_.notify_all();
    }
  }

  void read_loop(int index) {
    Session& s = *sessions_[static_cast<std::size_t>(index)];
    while (true) {
      Message msg;
      try {
        if (!recv_message(s.sock, msg)) break;
      } catch (const ProtocolError&) {
        break;
      }
      if (std::holds_alternative<ResultReturnMsg>(msg)) {
        ResultReturnMsg& m = std::get<ResultReturnMsg>(msg);
        std::lock_guard<std::mutex> lock(mx_);
        if (active_ && active_->task_id == m.task_id) {
          if (!(m.tensor.dims() == active_->out_dims)) {
            COCOI_LOG_WARN("worker %d returned wrong-shape piece for subtask %u", index,
                           m.subtask_index);
          } else if (!active_->got.count(m.subtask_index)) {  // duplicates are idempotent
            active_->got.emplace(m.subtask_index, std::move(m.tensor));
            active_->arrival_order.push_back(m.subtask_index);
            active_->finished_sessions.push_back(index);
            cv_.notify_all();
          }
        }
      } else if (std::holds_alternative<ErrorMsg>(msg)) {
        const ErrorMsg& m = std::get<ErrorMsg>(msg);
        COCOI_LOG_WARN("worker %d error %s: %s", index, m.code.c_str(), m.text.c_str());
      } else if (std::holds_alternative<HeartbeatMsg>(msg)) {
        // keepalive response; nothing to do
      } else {
        COCOI_LOG_WARN("worker %d sent unexpected message type", index);
      }
    }
    mark_dead(s);
  }

  // true when enough results arrived; returns early when every outstanding
  // assignment is on a dead session
  void wait_for_results(Collect& c, const std::vector<int>& row_session,
                        std::chrono::steady_clock::time_point deadline) {
    std::unique_lock<std::mutex> lock(mx_);
    cv_.wait_until(lock, deadline, [&] {
      if (static_cast<int>(c.got.size()) >= c.need) return true;
      int pending_alive = 0;
      for (std::size_t r = 0; r < row_session.size(); ++r) {
        const int si = row_session[r];
        if (si < 0 || c.got.count(static_cast<std::uint32_t>(r))) continue;
        if (!sessions_[static_cast<std::size_t>(si)]->dead.load()) ++pending_alive;
      }
      return pending_alive == 0;
    });
  }

  void redispatch_missing(Collect& c, std::vector<int>& row_session, std::uint64_t task_id,
                          std::uint32_t layer_id, const std::vector<Tensor4>& pieces, int k) {
    (void)k;
    std::vector<std::uint32_t> missing;
    std::vector<int> idle;
    {
      std::lock_guard<std::mutex> lock(mx_);
      const int have = static_cast<int>(c.got.size());
      int still_needed = c.need - have;
      // prefer rows that cannot arrive on their own (unassigned or on a dead
      // session); rows pending on a live-but-slow worker are a second choice
      for (int pass = 0; pass < 2 && still_needed > 0; ++pass) {
        for (std::size_t r = 0; r < row_session.size() && still_needed > 0; ++r) {
          if (c.got.count(static_cast<std::uint32_t>(r))) continue;
          const int si = row_session[r];
          const bool hopeless =
              si < 0 || sessions_[static_cast<std::size_t>(si)]->dead.load();
          if ((pass == 0) != hopeless) continue;
          if (std::find(missing.begin(), missing.end(), static_cast<std::uint32_t>(r)) !=
              missing.end())
            continue;
          missing.push_back(static_cast<std::uint32_t>(r));
          --still_needed;
        }
      }
      // fastest responders first: finished_sessions is already arrival-ordered
      for (int si : c.finished_sessions)
        if (!sessions_[static_cast<std::size_t>(si)]->dead.load()) idle.push_back(si);
    }
    if (missing.empty()) return;
    if (idle.empty()) {
      // no finished worker to lean on; fall back to any alive session
      for (int i = 0; i < n(); ++i)
        if (!sessions_[static_cast<std::size_t>(i)]->dead.load()) idle.push_back(i);
      if (idle.empty()) return;
    }
    COCOI_LOG_INFO("redispatching %zu subtasks", missing.size());
    std::size_t next = 0;
    for (std::uint32_t r : missing) {
      const int si = idle[next % idle.size()];
      ++next;
      send_to(*sessions_[static_cast<std::size_t>(si)],
              TaskAssignMsg{task_id, layer_id, r, pieces[r]});
      row_session[r] = si;
    }
  }

  double resolve_timeout(const ConvSpec& spec, const SplitPlan& plan, int k, int h_in,
                         const ExecOptions& opts) const {
    if (opts.timeout_s > 0) return opts.timeout_s;
    if (opts.profile) {
      const PieceRange& pr = plan.pieces.front();
      const int h_out = output_extent(h_in, spec.kernel, spec.stride);
      const WorkloadSizes s =
          workload_sizes(spec.in_channels, spec.out_channels, h_in, h_out, pr.w_in(),
                         pr.w_out(), spec.kernel, k, n());
      return 5.0 * detail::predicted_subtask_mean(s, *opts.profile);
    }
    return 10.0;
  }

  std::vector<std::unique_ptr<Session>> sessions_;
  std::mutex mx_;
  std::condition_variable cv_;
  Collect* active_ = nullptr;
  std::uint64_t next_task_id_ = 1;
  int last_cancel_count_ = 0;
};

// Full-model driver: distributes weights up front, then times each layer.
inline MasterReport run_master(const ModelConfig& model,
                               const std::vector<WorkerEndpoint>& endpoints,
                               const Tensor4& input, const ExecOptions& opts) {
  MasterCluster cluster(endpoints);
  for (std::size_t li = 0; li < model.layers.size(); ++li)
    if (model.layers[li].type == 1)
      cluster.load_layer(static_cast<std::uint32_t>(li), model.layers[li].spec);

  MasterReport report;
  Tensor4 x = input;
  const double t0 = detail::now_s();
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const LayerCfg& lc = model.layers[li];
    if (lc.type == 1) {
      int k = opts.k;
      if (opts.uncoded) {
        k = cluster.n();
      } else if (k <= 0) {
        if (opts.profile) {
          SystemParams p;
          p.n = cluster.n();
          p.layer = LayerGeometry::from_spec(lc.spec, x.h(), x.w());
          p.profile = *opts.profile;
          k = minimize_L(p).k_circ;
        } else {
          k = std::max(1, cluster.n() - 1);
        }
        const int w_out =
            output_extent(x.w() + 2 * lc.spec.padding, lc.spec.kernel, lc.spec.stride);
        k = std::min(k, std::min(cluster.n() - 1, w_out));
      }
      PhaseTiming enc{lc.name, "enc", 0}, exec{lc.name, "exec", 0}, dec{lc.name, "dec", 0};
      try {
        x = cluster.execute_layer_distributed(static_cast<std::uint32_t>(li), lc.spec, x, k,
                                              opts, &enc, &exec, &dec);
      } catch (const LayerFailure& e) {
        throw LayerFailure("layer " + std::to_string(li) + " (" + lc.name + "): " + e.what());
      }
      report.timing.push_back(enc);
      report.timing.push_back(exec);
      report.timing.push_back(dec);
    } else {
      const double t1 = detail::now_s();
      if (lc.op == "relu") {
        std::vector<float> buf = x.data();
        for (float& v : buf)
          if (v < 0) v = 0;
        x = Tensor4(x.dims(), std::move(buf));
      }
      report.timing.push_back(PhaseTiming{lc.name, "local", detail::now_s() - t1});
    }
  }
  report.total_s = detail::now_s() - t0;
  report.output = std::move(x);
  return report;
}

}  // namespace cocoi
