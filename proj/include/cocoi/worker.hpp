#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>

#include "cocoi/log.hpp"
#include "cocoi/net.hpp"
#include "cocoi/tensor.hpp"
#include "cocoi/wire.hpp"

namespace cocoi {

struct WorkerOptions {
  std::uint32_t worker_id = 0;
  int inject_sleep_ms = 0;  // artificial per-subtask delay, for tests
};

namespace detail {

// conv2d with a cooperative cancellation check between output columns; the
// accumulation order per element matches conv2d exactly, bias is never
// applied (the master adds it after decoding)
inline std::optional<Tensor4d> conv2d_cancellable(const Tensor4d& x, const ConvSpecd& spec,
                                                  const std::atomic<bool>& cancel) {
  const auto [h_out, w_out] = output_hw(spec, static_cast<int>(x.h()), static_cast<int>(x.w()));
  const Dims4 od{x.b(), static_cast<std::uint32_t>(spec.out_channels),
                 static_cast<std::uint32_t>(h_out), static_cast<std::uint32_t>(w_out)};
  std::vector<double> out(od.count(), 0.0);
  const int kk = spec.kernel, st = spec.stride;
  const int nb = static_cast<int>(x.b());
  for (int ox = 0; ox < w_out; ++ox) {
    if (cancel.load(std::memory_order_relaxed)) return std::nullopt;
    for (int b = 0; b < nb; ++b)
      for (int co = 0; co < spec.out_channels; ++co)
        for (int oy = 0; oy < h_out; ++oy) {
          double acc = 0.0;
          for (int ci = 0; ci < spec.in_channels; ++ci)
            for (int ky = 0; ky < kk; ++ky)
              for (int kx = 0; kx < kk; ++kx)
                acc += x.at(b, ci, oy * st + ky, ox * st + kx) * spec.weights.at(co, ci, ky, kx);
          out[((static_cast<std::size_t>(b) * od.c + co) * od.h + oy) * od.w + ox] = acc;
        }
  }
  return Tensor4d(od, std::move(out));
}

inline bool cancellable_sleep(int ms, const std::atomic<bool>& cancel) {
  using namespace std::chrono;
  const auto end = steady_clock::now() + milliseconds(ms);
  while (steady_clock::now() < end) {
    if (cancel.load(std::memory_order_relaxed)) return false;
    std::this_thread::sleep_for(milliseconds(5));
  }
  return !cancel.load(std::memory_order_relaxed);
}

}  // namespace detail

// Serves one master connection until EOF. Single in-flight task: compute runs
// on its own thread so Cancel frames are seen mid-computation; the reader
// joins it before starting the next task.
inline void serve_connection(Socket& conn, const WorkerOptions& opts) {
  std::mutex send_mx;
  auto send = [&](const Message& m) {
    std::lock_guard<std::mutex> lock(send_mx);
    try {
      send_message(conn, m);
    } catch (const ProtocolError&) {
      // peer gone; reader will notice on its next recv
    }
  };

  send(HelloMsg{opts.worker_id});

  std::map<std::uint32_t, ConvSpecd> layers;
  std::thread compute;
  std::atomic<bool> cancel{false};
  std::uint64_t inflight_task = 0;
  auto join_compute = [&] {
    if (compute.joinable()) compute.join();
  };

  while (true) {
    Message msg;
    try {
      if (!recv_message(conn, msg)) break;  // clean EOF
    } catch (const ProtocolError& e) {
      COCOI_LOG_WARN("worker %u: malformed frame: %s", opts.worker_id, e.what());
      send(ErrorMsg{"bad-frame", e.what()});
      break;
    }

    if (std::holds_alternative<LoadLayerMsg>(msg)) {
      LoadLayerMsg& m = std::get<LoadLayerMsg>(msg);
      join_compute();
      layers[m.layer_id] = convert_spec<double>(m.spec);
      COCOI_LOG_DEBUG("worker %u: loaded layer %u", opts.worker_id, m.layer_id);
    } else if (std::holds_alternative<TaskAssignMsg>(msg)) {
      join_compute();
      TaskAssignMsg m = std::move(std::get<TaskAssignMsg>(msg));
      const auto it = layers.find(m.layer_id);
      if (it == layers.end()) {
        send(ErrorMsg{"layer-not-loaded", "layer " + std::to_string(m.layer_id)});
        continue;
      }
      cancel.store(false, std::memory_order_relaxed);
      inflight_task = m.task_id;
      const ConvSpecd* spec = &it->second;
      compute = std::thread([&, m = std::move(m), spec] {
        if (opts.inject_sleep_ms > 0 &&
            !detail::cancellable_sleep(opts.inject_sleep_ms, cancel)) {
          COCOI_LOG_DEBUG("worker %u: task %llu cancelled in sleep", opts.worker_id,
                          static_cast<unsigned long long>(m.task_id));
          return;
        }
        std::optional<Tensor4d> out;
        try {
          out = detail::conv2d_cancellable(convert<double>(m.tensor), *spec, cancel);
        } catch (const std::exception& e) {
          send(ErrorMsg{"compute-failed", e.what()});
          return;
        }
        if (!out) {
          COCOI_LOG_DEBUG("worker %u: task %llu cancelled", opts.worker_id,
                          static_cast<unsigned long long>(m.task_id));
          return;
        }
        send(ResultReturnMsg{m.task_id, m.subtask_index, convert<float>(*out)});
      });
    } else if (std::holds_alternative<CancelMsg>(msg)) {
      if (std::get<CancelMsg>(msg).task_id == inflight_task)
        cancel.store(true, std::memory_order_relaxed);
    } else if (std::holds_alternative<HeartbeatMsg>(msg)) {
      send(HeartbeatMsg{});
    } else if (std::holds_alternative<ErrorMsg>(msg)) {
      const ErrorMsg& m = std::get<ErrorMsg>(msg);
      COCOI_LOG_WARN("worker %u: peer error %s: %s", opts.worker_id, m.code.c_str(),
                     m.text.c_str());
    } else {
      send(ErrorMsg{"unexpected-message", "message not valid in worker role"});
      break;
    }
  }
  cancel.store(true, std::memory_order_relaxed);
  join_compute();
}

// Binds, announces the port ("LISTENING <port>" on stdout), and serves one
// master connection at a time, forever.
[[noreturn]] inline void run_worker(std::uint16_t port, const WorkerOptions& opts) {
  std::uint16_t bound = 0;
  Socket listener = listen_on(port, &bound);
  std::printf("LISTENING %u\n", static_cast<unsigned>(bound));
  std::fflush(stdout);
  while (true) {
    Socket conn = accept_one(listener);
    COCOI_LOG_INFO("worker %u: master connected", opts.worker_id);
    serve_connection(conn, opts);
    COCOI_LOG_INFO("worker %u: master disconnected", opts.worker_id);
  }
}

}  // namespace cocoi
