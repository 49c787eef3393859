// Prints the analytic latency curve L(k) next to Monte Carlo estimates for a
// mid-size layer, showing the U shape and the optimizer's pick.
#include <cstdio>

#include "cocoi/optimize.hpp"
#include "cocoi/simulate.hpp"

using namespace cocoi;

int main() {
  SystemParams p;
  p.n = 10;
  ConvSpec spec;
  spec.in_channels = 32;
  spec.out_channels = 32;
  spec.kernel = 3;
  spec.stride = 1;
  spec.padding = 1;
  p.layer = LayerGeometry::from_spec(spec, 56, 56);
  p.profile.mu_m = 2e8;
  p.profile.theta_m = 2e-9;
  p.profile.mu_cmp = 1e8;
  p.profile.theta_cmp = 4e-10;
  p.profile.mu_rec = 1.2e7;
  p.profile.theta_rec = 6e-8;
  p.profile.mu_sen = 1.2e7;
  p.profile.theta_sen = 6e-8;

  const MinimizeResult r = minimize_L(p);
  std::printf("k_relaxed=%.3f  k_circ=%d\n", r.k_relaxed, r.k_circ);
  std::printf("%3s %12s %12s\n", "k", "L(k)", "simulated");
  ScenarioConfig sc;
  for (int k = 1; k < p.n; ++k) {
    const SummaryStats st = simulate_layer(Strategy::coded(k), p, sc, 4000, 7);
    std::printf("%3d %12.6f %12.6f%s\n", k, objective_L(k, p), st.mean_s,
                k == r.k_circ ? "  <- k_circ" : "");
  }
  std::printf("uncoded analytic %.6f\n", uncoded_expected(p));
  return 0;
}
