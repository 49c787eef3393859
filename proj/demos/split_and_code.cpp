// End-to-end coded convolution on one machine: split, encode, "compute" each
// coded piece, decode from a survivor subset, and compare with the direct
// convolution of the whole input.
#include <cstdio>
#include <vector>

#include "cocoi/mds.hpp"
#include "cocoi/rng.hpp"
#include "cocoi/split.hpp"
#include "cocoi/tensor.hpp"

using namespace cocoi;

int main() {
  const int n = 5, k = 3;
  SplitMix64 rng(42);

  ConvSpecd spec;
  spec.in_channels = 2;
  spec.out_channels = 4;
  spec.kernel = 3;
  spec.stride = 1;
  spec.padding = 1;
  std::vector<double> w(static_cast<std::size_t>(4) * 2 * 3 * 3);
  for (double& v : w) v = rng.next_in(-0.5, 0.5);
  spec.weights = Tensor4d(Dims4{4, 2, 3, 3}, std::move(w));

  std::vector<double> xd(static_cast<std::size_t>(2) * 16 * 19);
  for (double& v : xd) v = rng.next_in(-1.0, 1.0);
  const Tensor4d x(Dims4{1, 2, 16, 19}, std::move(xd));
  const Tensor4d padded = pad(x, spec.padding);

  const SplitPlan plan = plan_split(spec.kernel, spec.stride, static_cast<int>(padded.w()), k);
  std::printf("split: W_O=%d into %d pieces of width %d", plan.w_out, plan.k,
              plan.pieces.front().w_out());
  if (plan.remainder)
    std::printf(" + remainder %d", plan.remainder->w_out());
  std::printf("\n");

  std::vector<std::vector<double>> parts;
  for (const PieceRange& p : plan.pieces)
    parts.push_back(flatten(slice_width(padded, p.a_in, p.b_in)));
  const GenerationMatrix g = build_vandermonde(n, k);
  const std::vector<std::vector<double>> coded = mds_encode(g, parts);

  // every "worker" convolves its encoded piece; workers 0 and 3 never reply
  const Dims4 pdims{1, 2, padded.h(), static_cast<std::uint32_t>(plan.pieces.front().w_in())};
  std::vector<int> survivors{1, 2, 4};
  std::vector<std::vector<double>> outputs;
  for (int i : survivors)
    outputs.push_back(flatten(conv2d(restore(std::vector<double>(coded[i]), pdims), spec, false)));

  const std::vector<std::vector<double>> decoded = mds_decode(g, survivors, outputs);

  const Tensor4d oracle = conv2d(padded, spec, false);
  double worst = 0;
  for (int j = 0; j < k; ++j) {
    const PieceRange& p = plan.pieces[j];
    const Tensor4d piece = slice_width(oracle, p.a_out, p.b_out);
    for (std::size_t i = 0; i < decoded[j].size(); ++i) {
      const double denom = std::abs(piece.data()[i]) > 1 ? std::abs(piece.data()[i]) : 1.0;
      const double rel = std::abs(decoded[j][i] - piece.data()[i]) / denom;
      if (rel > worst) worst = rel;
    }
  }
  std::printf("decoded %d pieces from survivors {1,2,4}; worst relative error %.3g\n", k, worst);
  return worst < 1e-9 ? 0 : 1;
}
