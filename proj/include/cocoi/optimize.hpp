#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "cocoi/latency.hpp"

namespace cocoi {

// Worker count + layer extents + straggling profile: everything the
// closed-form latency analysis needs.
struct SystemParams {
  int n = 0;
  LayerGeometry layer;
  PhaseProfile profile;

  void validate() const {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    profile.validate();
  }
};

// Coefficients of the reduced objective P(k) = h1*k + h2/k
// + h3*(1/k)*ln(n/(n-k)) + h4*ln(n/(n-k)) and friends.
struct AnalysisCoeffs {
  double i_ov = 0;     // C_I*H_I*(K - S):   k-independent input overlap per piece
  double i_w = 0;      // C_I*H_I*W_O*S:     k-scaled input share
  double o = 0;        // C_O*H_O*W_O:       total output volume
  double n_cmp_t = 0;  // 2*C_O*H_O*C_I*K^2*W_O: whole-layer compute FLOPs
  double h1 = 0, h2 = 0, h3 = 0, h4 = 0, h5 = 0;
  double r = 0;  // h2/h3
};

inline AnalysisCoeffs analysis_coeffs(const SystemParams& params) {
  params.validate();
  const LayerGeometry& g = params.layer;
  const PhaseProfile& pf = params.profile;
  AnalysisCoeffs c;
  c.i_ov = static_cast<double>(g.c_in) * g.h_in * (g.kernel - g.stride);
  c.i_w = static_cast<double>(g.c_in) * g.h_in * g.w_out * g.stride;
  c.o = static_cast<double>(g.c_out) * g.h_out * g.w_out;
  c.n_cmp_t = 2.0 * g.c_out * g.h_out * g.c_in * g.kernel * g.kernel * g.w_out;
  const double master = 1.0 / pf.mu_m + pf.theta_m;
  c.h1 = 2.0 * master * (params.n * c.i_ov + c.o);
  c.h2 = 4.0 * c.i_w * pf.theta_rec + 4.0 * c.o * pf.theta_sen + c.n_cmp_t * pf.theta_cmp;
  c.h3 = 4.0 * c.i_w / pf.mu_rec + 4.0 * c.o / pf.mu_sen + c.n_cmp_t / pf.mu_cmp;
  c.h4 = 4.0 * c.i_ov / pf.mu_rec;
  c.h5 = 4.0 * c.i_ov * pf.theta_rec;
  c.r = c.h2 / c.h3;
  return c;
}

// relaxed workload sizes at real-valued k: W_O_p = W_O/k without the floor
inline WorkloadSizes relaxed_sizes(const SystemParams& params, double k) {
  const LayerGeometry& g = params.layer;
  const double w_out_piece = static_cast<double>(g.w_out) / k;
  const double w_in_piece = g.kernel + (w_out_piece - 1.0) * g.stride;
  return workload_sizes(g.c_in, g.c_out, g.h_in, g.h_out, w_in_piece, w_out_piece, g.kernel, k,
                        params.n);
}

// approximate expected overall latency L(k) on the relaxed sizes:
// (N_enc + N_dec)(1/mu_m + theta_m) + theta_sum + mu_sum * ln(n/(n-k))
inline double objective_L(double k, const SystemParams& params) {
  params.validate();
  if (!(k >= 1.0) || !(k < params.n))
    throw std::invalid_argument("need 1 <= k < n");
  const PhaseProfile& pf = params.profile;
  const WorkloadSizes s = relaxed_sizes(params, k);
  const double theta_sum = s.n_rec * pf.theta_rec + s.n_cmp * pf.theta_cmp + s.n_sen * pf.theta_sen;
  const double mu_sum = s.n_rec / pf.mu_rec + s.n_cmp / pf.mu_cmp + s.n_sen / pf.mu_sen;
  return (s.n_enc + s.n_dec) * (1.0 / pf.mu_m + pf.theta_m) + theta_sum +
         mu_sum * std::log(static_cast<double>(params.n) / (params.n - k));
}

// the reduced form; L(k) = P(k) + objective_constant(params)
inline double objective_P(double k, int n, const AnalysisCoeffs& c) {
  const double lg = std::log(static_cast<double>(n) / (n - k));
  return c.h1 * k + c.h2 / k + c.h3 * lg / k + c.h4 * lg;
}

inline double objective_constant(const SystemParams& params) {
  const AnalysisCoeffs c = analysis_coeffs(params);
  return 2.0 * params.n * c.i_w * (1.0 / params.profile.mu_m + params.profile.theta_m) + c.h5;
}

// signed residual of the stationarity condition at k, normalized by the
// larger side: l(k) = -h1 + h2/k^2 must meet
// r(k) = h4/(n-k) + h3*(-(1/k^2) ln(n/(n-k)) + 1/(k(n-k)))
inline double stationarity_residual(const SystemParams& params, double k) {
  const AnalysisCoeffs c = analysis_coeffs(params);
  const int n = params.n;
  const double lhs = -c.h1 + c.h2 / (k * k);
  const double rhs = c.h4 / (n - k) +
                     c.h3 * (-std::log(static_cast<double>(n) / (n - k)) / (k * k) +
                             1.0 / (k * (n - k)));
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::abs(lhs - rhs) / scale;
}

struct MinimizeResult {
  double k_relaxed = 1.0;
  int k_circ = 1;
};

// golden-section search on [1, n - eps]; Lemma 1 gives unimodality, so the
// bracket shrink is safe. k_circ compares L at floor/ceil inside {1..n-1}.
inline MinimizeResult minimize_L(const SystemParams& params) {
  params.validate();
  if (params.n < 2) throw std::invalid_argument("need n >= 2");
  const double n = params.n;
  double lo = 1.0;
  double hi = n - std::min(1e-9 * n, 1e-9);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = objective_L(x1, params);
  double f2 = objective_L(x2, params);
  while (hi - lo > 1e-6) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = objective_L(x1, params);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = objective_L(x2, params);
    }
  }
  MinimizeResult res;
  res.k_relaxed = 0.5 * (lo + hi);
  const int fl = std::max(1, std::min(params.n - 1, static_cast<int>(std::floor(res.k_relaxed))));
  const int ce = std::max(1, std::min(params.n - 1, static_cast<int>(std::ceil(res.k_relaxed))));
  res.k_circ = (objective_L(fl, params) <= objective_L(ce, params)) ? fl : ce;
  return res;
}

// uncoded expectation (log-approximated max of n): h2/n + h3 ln(n)/n
// + h4 ln(n) + h5
inline double uncoded_expected(const SystemParams& params) {
  const AnalysisCoeffs c = analysis_coeffs(params);
  const double n = params.n;
  const double lg = std::log(n);
  return c.h2 / n + c.h3 * lg / n + c.h4 * lg + c.h5;
}

// term decomposition for the omitted-terms comparison mode
struct UncodedTerms {
  double base = 0;     // h2/n + h3 ln(n)/n
  double h4_term = 0;  // h4 ln(n)
  double h5_term = 0;  // h5
};

inline UncodedTerms uncoded_terms(const SystemParams& params) {
  const AnalysisCoeffs c = analysis_coeffs(params);
  const double n = params.n;
  UncodedTerms t;
  t.base = c.h2 / n + c.h3 * std::log(n) / n;
  t.h4_term = c.h4 * std::log(n);
  t.h5_term = c.h5;
  return t;
}

// straggler gain h(n,k) = (k ln n - n ln(n/(n-k)))/(n-k); coded beats uncoded
// (omitted-terms forms) exactly when R < h(n,k)
inline double straggler_gain(int n, double k) {
  if (n < 3 || !(k >= 1.0) || !(k < n)) throw std::invalid_argument("need n >= 3, 1 <= k < n");
  return (k * std::log(static_cast<double>(n)) -
          n * std::log(static_cast<double>(n) / (n - k))) /
         (n - k);
}

struct OptimalComparison {
  double k_sub_star = 0;  // n - e
  double delta = 0;       // E[T^u_m] - E[T^c_m], omitted-terms forms
  double reduction = 0;   // delta / E[T^u_m]
};

// coded-vs-uncoded closed forms with h4 and enc/dec dropped, both evaluated
// with the suboptimal k = n - e
inline OptimalComparison optimal_comparison(const SystemParams& params) {
  const AnalysisCoeffs c = analysis_coeffs(params);
  const int n = params.n;
  if (n < 4) throw std::invalid_argument("need n >= 4 for k = n - e");
  OptimalComparison res;
  res.k_sub_star = n - std::exp(1.0);
  const double k = res.k_sub_star;
  const double uncoded = c.h2 / n + c.h3 * std::log(static_cast<double>(n)) / n + c.h5;
  const double coded =
      c.h2 / k + c.h3 * std::log(static_cast<double>(n) / (n - k)) / k + c.h5;
  res.delta = uncoded - coded;
  res.reduction = res.delta / uncoded;
  if (c.r <= 1.0 && n >= 10 && !(res.delta > 0))
    throw std::logic_error("delta must be positive for R <= 1, n >= 10");
  return res;
}

struct FailureComparison {
  double coded_increase_units = 0;  // in per-subtask N/mu units
  double coded_increase_s = 0;      // scaled by mu_sum at the operating k
  double uncoded_lower_bound_s = 0; // R_cmp * E[T^u_m] = E[T^cmp at k=n]
  double r_cmp = 0;
};

// latency increase when one of n workers drops out: coded waits for the k-th
// of n-1 instead of n; uncoded must re-execute at least one full compute phase
inline FailureComparison failure_comparison(const SystemParams& params, int k) {
  params.validate();
  const int n = params.n;
  if (k < 1 || k >= n) throw std::invalid_argument("need 1 <= k < n");
  FailureComparison res;
  res.coded_increase_units =
      (harmonic(n - 1) - harmonic(n - 1 - k)) - (harmonic(n) - harmonic(n - k));
  const PhaseProfile& pf = params.profile;
  const WorkloadSizes sk = relaxed_sizes(params, k);
  const double mu_sum = sk.n_rec / pf.mu_rec + sk.n_cmp / pf.mu_cmp + sk.n_sen / pf.mu_sen;
  res.coded_increase_s = mu_sum * res.coded_increase_units;
  const WorkloadSizes sn = relaxed_sizes(params, params.n);
  const double e_cmp = sn.n_cmp * pf.theta_cmp + sn.n_cmp / pf.mu_cmp;
  res.uncoded_lower_bound_s = e_cmp;
  res.r_cmp = e_cmp / uncoded_expected(params);
  return res;
}

}  // namespace cocoi
