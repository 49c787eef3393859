// Writes a small two-conv-layer model (config JSON + weights sidecar) and a
// random input tensor, ready for the master/worker/oracle subcommands:
//
//   demos/demo_gen_model /tmp/m
//   cocoi worker --port 0 &            (x4, note the printed ports)
//   cocoi master --config /tmp/m/model.json --worker 127.0.0.1:PORT ...
//       --input /tmp/m/input.cct --k 2 --output /tmp/m/out.cct
//   cocoi oracle --config /tmp/m/model.json --input /tmp/m/input.cct
//       --output /tmp/m/oracle.cct
#include <cstdio>
#include <string>
#include <sys/stat.h>
#include <vector>

#include "cocoi/model.hpp"
#include "cocoi/rng.hpp"
#include "cocoi/tensor.hpp"

using namespace cocoi;

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "/tmp/cocoi_model";
  ::mkdir(dir.c_str(), 0755);
  SplitMix64 rng(2024);

  ModelConfig m;
  m.layers.push_back(make_conv_layer("conv1", 3, 8, 3, 1, 1, true, rng));
  LayerCfg relu;
  relu.type = 2;
  relu.name = "relu1";
  relu.op = "relu";
  relu.flops = 8 * 24 * 24;
  m.layers.push_back(relu);
  m.layers.push_back(make_conv_layer("conv2", 8, 4, 3, 1, 0, true, rng));
  save_model(m, dir + "/model.json", "model.bin");

  std::vector<float> xv(static_cast<std::size_t>(3) * 24 * 24);
  for (float& v : xv) v = static_cast<float>(rng.next_in(-1.0, 1.0));
  save_tensor(dir + "/input.cct", Tensor4(Dims4{1, 3, 24, 24}, std::move(xv)));

  std::printf("wrote %s/model.json, model.bin, input.cct\n", dir.c_str());
  return 0;
}
