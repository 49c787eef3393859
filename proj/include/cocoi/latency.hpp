#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocoi/errors.hpp"
#include "cocoi/rng.hpp"
#include "cocoi/split.hpp"
#include "cocoi/tensor.hpp"

namespace cocoi {

// Shift-exponential latency: P(T <= t) = 1 - exp(-(mu/N)(t - N*theta)) for
// t >= N*theta. N is the workload scale (FLOPs or bytes), theta the minimum
// seconds per work unit, mu the straggling coefficient in work units per
// second.
struct ShiftExpParams {
  double mu = 1.0;
  double theta = 0.0;
  double n_units = 1.0;

  void validate() const {
    if (!(mu > 0) || !(theta >= 0) || !(n_units > 0))
      throw std::invalid_argument("need mu > 0, theta >= 0, N > 0");
  }
};

inline double cdf(double t, const ShiftExpParams& p) {
  p.validate();
  const double shift = p.n_units * p.theta;
  if (t < shift) return 0.0;
  return 1.0 - std::exp(-(p.mu / p.n_units) * (t - shift));
}

inline double quantile(const ShiftExpParams& p, double q) {
  p.validate();
  if (!(q >= 0.0) || q >= 1.0) throw std::invalid_argument("need 0 <= q < 1");
  return p.n_units * p.theta - (p.n_units / p.mu) * std::log1p(-q);
}

inline double sample(const ShiftExpParams& p, SplitMix64& rng) {
  p.validate();
  return p.n_units * p.theta + (p.n_units / p.mu) * rng.next_exponential();
}

inline double mean_latency(const ShiftExpParams& p) {
  return p.n_units * p.theta + p.n_units / p.mu;
}

// moment/min fit: theta_hat = min/N, mu_hat = N/(mean - min); reproduces the
// sample mean exactly
inline ShiftExpParams fit(const std::vector<double>& samples, double n_units) {
  if (samples.size() < 2) throw FitError("need at least 2 samples");
  if (!(n_units > 0)) throw std::invalid_argument("need N > 0");
  const double lo = *std::min_element(samples.begin(), samples.end());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  if (!(mean > lo)) throw FitError("degenerate fit: all samples equal");
  ShiftExpParams p;
  p.n_units = n_units;
  p.theta = lo / n_units;
  p.mu = n_units / (mean - lo);
  return p;
}

// Per-phase straggling parameters: master compute, worker compute, worker
// input receive, worker output send.
struct PhaseProfile {
  double mu_m = 1.0, theta_m = 0.0;
  double mu_cmp = 1.0, theta_cmp = 0.0;
  double mu_rec = 1.0, theta_rec = 0.0;
  double mu_sen = 1.0, theta_sen = 0.0;

  void validate() const {
    if (!(mu_m > 0 && mu_cmp > 0 && mu_rec > 0 && mu_sen > 0))
      throw std::invalid_argument("all mu must be > 0");
    if (!(theta_m >= 0 && theta_cmp >= 0 && theta_rec >= 0 && theta_sen >= 0))
      throw std::invalid_argument("all theta must be >= 0");
  }
};

inline PhaseProfile profile_from_json(const nlohmann::json& j) {
  PhaseProfile p;
  p.mu_m = j.at("mu_m").get<double>();
  p.theta_m = j.at("theta_m").get<double>();
  p.mu_cmp = j.at("mu_cmp").get<double>();
  p.theta_cmp = j.at("theta_cmp").get<double>();
  p.mu_rec = j.at("mu_rec").get<double>();
  p.theta_rec = j.at("theta_rec").get<double>();
  p.mu_sen = j.at("mu_sen").get<double>();
  p.theta_sen = j.at("theta_sen").get<double>();
  p.validate();
  return p;
}

inline nlohmann::json to_json(const PhaseProfile& p) {
  return {{"mu_m", p.mu_m},     {"theta_m", p.theta_m},     {"mu_cmp", p.mu_cmp},
          {"theta_cmp", p.theta_cmp}, {"mu_rec", p.mu_rec}, {"theta_rec", p.theta_rec},
          {"mu_sen", p.mu_sen}, {"theta_sen", p.theta_sen}};
}

// Conv-layer extents the latency/optimizer algebra runs on. h_in/w_in are the
// padded extents; batch is 1 throughout.
struct LayerGeometry {
  int c_in = 0, c_out = 0;
  int kernel = 1, stride = 1;
  int h_in = 0, w_in = 0;
  int h_out = 0, w_out = 0;

  static LayerGeometry make(int c_in, int c_out, int kernel, int stride, int h_in_padded,
                            int w_in_padded) {
    LayerGeometry g;
    g.c_in = c_in;
    g.c_out = c_out;
    g.kernel = kernel;
    g.stride = stride;
    g.h_in = h_in_padded;
    g.w_in = w_in_padded;
    g.h_out = output_extent(h_in_padded, kernel, stride);
    g.w_out = output_extent(w_in_padded, kernel, stride);
    if (c_in < 1 || c_out < 1) throw GeometryError("channel counts must be positive");
    return g;
  }

  template <typename T>
  static LayerGeometry from_spec(const ConvSpecT<T>& spec, int h_in_unpadded, int w_in_unpadded) {
    return make(spec.in_channels, spec.out_channels, spec.kernel, spec.stride,
                h_in_unpadded + 2 * spec.padding, w_in_unpadded + 2 * spec.padding);
  }
};

// geometry JSON keys: in_channels, out_channels, kernel_size, stride, padding,
// input_height, input_width (unpadded)
inline LayerGeometry geometry_from_json(const nlohmann::json& j) {
  const int padding = j.value("padding", 0);
  return LayerGeometry::make(j.at("in_channels").get<int>(), j.at("out_channels").get<int>(),
                             j.at("kernel_size").get<int>(), j.value("stride", 1),
                             j.at("input_height").get<int>() + 2 * padding,
                             j.at("input_width").get<int>() + 2 * padding);
}

inline nlohmann::json to_json(const LayerGeometry& g) {
  // emitted with padding folded in; parses back through make()
  return {{"in_channels", g.c_in},  {"out_channels", g.c_out}, {"kernel_size", g.kernel},
          {"stride", g.stride},     {"padding", 0},            {"input_height", g.h_in},
          {"input_width", g.w_in}};
}

// Work scales of the five phases of one coded layer execution. FLOPs for
// enc/cmp/dec, bytes for rec/sen (4-byte floats).
struct WorkloadSizes {
  double n_enc = 0, n_cmp = 0, n_rec = 0, n_sen = 0, n_dec = 0;
};

// raw-extent form: per-piece input/output widths given directly
inline WorkloadSizes workload_sizes(double c_in, double c_out, double h_in, double h_out,
                                    double w_in_piece, double w_out_piece, int kernel, double k,
                                    double n) {
  WorkloadSizes s;
  s.n_enc = 2.0 * k * n * c_in * h_in * w_in_piece;
  s.n_cmp = c_out * h_out * w_out_piece * 2.0 * c_in * kernel * kernel;
  s.n_rec = 4.0 * c_in * h_in * w_in_piece;
  s.n_sen = 4.0 * c_out * h_out * w_out_piece;
  s.n_dec = 2.0 * k * k * c_out * h_out * w_out_piece;
  return s;
}

// plan-based form: per-piece widths from the (floored) split plan
inline WorkloadSizes workload_sizes(const LayerGeometry& g, const SplitPlan& plan, int n) {
  if (plan.pieces.empty()) throw std::invalid_argument("plan has no pieces");
  const PieceRange& p = plan.pieces.front();
  return workload_sizes(g.c_in, g.c_out, g.h_in, g.h_out, p.w_in(), p.w_out(), g.kernel,
                        plan.k, n);
}

inline double harmonic(int m) {
  double h = 0.0;
  for (int i = 1; i <= m; ++i) h += 1.0 / i;
  return h;
}

// exact expectation of the k-th smallest of n i.i.d. shift-exponentials:
// N*theta + (N/mu)(H_n - H_{n-k})
inline double expected_kth_order_stat(int n, int k, const ShiftExpParams& p) {
  p.validate();
  if (k < 1 || k > n) throw std::invalid_argument("need 1 <= k <= n");
  return p.n_units * p.theta + (p.n_units / p.mu) * (harmonic(n) - harmonic(n - k));
}

// the log approximation N*theta + (N/mu) ln(n/(n-k)), defined for k < n
inline double expected_kth_order_stat_log(int n, int k, const ShiftExpParams& p) {
  p.validate();
  if (k < 1 || k >= n) throw std::invalid_argument("need 1 <= k < n");
  return p.n_units * p.theta +
         (p.n_units / p.mu) * std::log(static_cast<double>(n) / (n - k));
}

}  // namespace cocoi
