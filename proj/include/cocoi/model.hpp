#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocoi/errors.hpp"
#include "cocoi/rng.hpp"
#include "cocoi/simulate.hpp"
#include "cocoi/tensor.hpp"

namespace cocoi {

// One model stage. type 1 = distributed conv; type 2 = master-local
// elementwise op with a flat FLOP count (relu or noop).
struct LayerCfg {
  int type = 1;
  std::string name;
  ConvSpec spec;  // type 1; weights/bias filled from the sidecar
  std::uint64_t weights_offset = 0;
  std::uint64_t weights_len = 0;  // bytes in the sidecar (weights then bias)
  std::string op = "relu";        // type 2
  double flops = 0;               // type 2
};

struct ModelConfig {
  std::vector<LayerCfg> layers;
  std::string weights_file;
};

namespace detail {

inline std::string dir_of(const std::string& path) {
  const std::size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

inline std::vector<float> read_f32_span(const std::string& path, std::uint64_t offset,
                                        std::uint64_t bytes) {
  if (bytes % 4 != 0) throw ProtocolError("weight span not a multiple of 4 bytes");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProtocolError("cannot open weights file: " + path);
  in.seekg(0, std::ios::end);
  const std::uint64_t size = static_cast<std::uint64_t>(in.tellg());
  if (offset + bytes > size) throw ProtocolError("weight index out of file bounds");
  in.seekg(static_cast<std::streamoff>(offset));
  std::vector<float> out(bytes / 4);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw ProtocolError("short read from weights file");
  return out;
}

}  // namespace detail

// Parses the model JSON and loads per-layer weights from the sidecar file
// (resolved relative to the config's directory unless absolute).
inline ModelConfig model_from_json(const nlohmann::json& j, const std::string& config_dir) {
  ModelConfig m;
  m.weights_file = j.value("weights_file", std::string());
  std::string weights_path = m.weights_file;
  if (!weights_path.empty() && weights_path.front() != '/')
    weights_path = config_dir + "/" + weights_path;
  for (const auto& lj : j.at("layers")) {
    LayerCfg lc;
    lc.type = lj.at("type").get<int>();
    lc.name = lj.value("name", std::string("layer"));
    if (lc.type == 1) {
      lc.spec.in_channels = lj.at("in_channels").get<int>();
      lc.spec.out_channels = lj.at("out_channels").get<int>();
      lc.spec.kernel = lj.at("kernel_size").get<int>();
      lc.spec.stride = lj.value("stride", 1);
      lc.spec.padding = lj.value("padding", 0);
      lc.weights_offset = lj.value("weights_offset", 0ull);
      lc.weights_len = lj.value("weights_len", 0ull);
      const bool has_bias = lj.value("bias", false);
      const std::uint64_t wcount = static_cast<std::uint64_t>(lc.spec.out_channels) *
                                   lc.spec.in_channels * lc.spec.kernel * lc.spec.kernel;
      const std::uint64_t expect = 4 * (wcount + (has_bias ? lc.spec.out_channels : 0));
      if (lc.weights_len != expect)
        throw ProtocolError("layer " + lc.name + ": weights_len mismatch");
      if (weights_path.empty()) throw ProtocolError("model has type-1 layers but no weights_file");
      std::vector<float> blob =
          detail::read_f32_span(weights_path, lc.weights_offset, lc.weights_len);
      lc.spec.weights = Tensor4(
          Dims4{static_cast<std::uint32_t>(lc.spec.out_channels),
                static_cast<std::uint32_t>(lc.spec.in_channels),
                static_cast<std::uint32_t>(lc.spec.kernel),
                static_cast<std::uint32_t>(lc.spec.kernel)},
          std::vector<float>(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(wcount)));
      if (has_bias)
        lc.spec.bias.assign(blob.begin() + static_cast<std::ptrdiff_t>(wcount), blob.end());
      lc.spec.validate();
    } else if (lc.type == 2) {
      lc.op = lj.value("op", std::string("relu"));
      lc.flops = lj.value("flops", 0.0);
      if (lc.op != "relu" && lc.op != "noop")
        throw ProtocolError("unknown type-2 op: " + lc.op);
    } else {
      throw ProtocolError("layer type must be 1 or 2");
    }
    m.layers.push_back(std::move(lc));
  }
  if (m.layers.empty()) throw ProtocolError("model has no layers");
  return m;
}

inline ModelConfig load_model(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw ProtocolError("cannot open model config: " + config_path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j, detail::dir_of(config_path));
}

// Writes config JSON + weights sidecar for a model whose specs already carry
// weights. Sidecar path is stored relative to the config.
inline void save_model(const ModelConfig& m, const std::string& config_path,
                       const std::string& weights_name) {
  const std::string dir = detail::dir_of(config_path);
  std::ofstream wout(dir + "/" + weights_name, std::ios::binary);
  if (!wout) throw ProtocolError("cannot write weights file");
  nlohmann::json layers = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const LayerCfg& lc : m.layers) {
    nlohmann::json lj;
    lj["type"] = lc.type;
    lj["name"] = lc.name;
    if (lc.type == 1) {
      lj["in_channels"] = lc.spec.in_channels;
      lj["out_channels"] = lc.spec.out_channels;
      lj["kernel_size"] = lc.spec.kernel;
      lj["stride"] = lc.spec.stride;
      lj["padding"] = lc.spec.padding;
      lj["bias"] = !lc.spec.bias.empty();
      const std::uint64_t bytes = 4 * (lc.spec.weights.size() + lc.spec.bias.size());
      lj["weights_offset"] = offset;
      lj["weights_len"] = bytes;
      wout.write(reinterpret_cast<const char*>(lc.spec.weights.raw()),
                 static_cast<std::streamsize>(4 * lc.spec.weights.size()));
      if (!lc.spec.bias.empty())
        wout.write(reinterpret_cast<const char*>(lc.spec.bias.data()),
                   static_cast<std::streamsize>(4 * lc.spec.bias.size()));
      offset += bytes;
    } else {
      lj["op"] = lc.op;
      lj["flops"] = lc.flops;
    }
    layers.push_back(std::move(lj));
  }
  nlohmann::json j;
  j["layers"] = std::move(layers);
  j["weights_file"] = weights_name;
  std::ofstream cout_(config_path);
  if (!cout_) throw ProtocolError("cannot write model config");
  cout_ << j.dump(2) << "\n";
}

// Random-weight conv layer for demos and integration tests.
inline LayerCfg make_conv_layer(const std::string& name, int c_in, int c_out, int kernel,
                                int stride, int padding, bool bias, SplitMix64& rng) {
  LayerCfg lc;
  lc.type = 1;
  lc.name = name;
  lc.spec.in_channels = c_in;
  lc.spec.out_channels = c_out;
  lc.spec.kernel = kernel;
  lc.spec.stride = stride;
  lc.spec.padding = padding;
  std::vector<float> w(static_cast<std::size_t>(c_out) * c_in * kernel * kernel);
  for (float& v : w) v = static_cast<float>(rng.next_in(-0.5, 0.5));
  lc.spec.weights = Tensor4(Dims4{static_cast<std::uint32_t>(c_out),
                                  static_cast<std::uint32_t>(c_in),
                                  static_cast<std::uint32_t>(kernel),
                                  static_cast<std::uint32_t>(kernel)},
                            std::move(w));
  if (bias) {
    lc.spec.bias.resize(static_cast<std::size_t>(c_out));
    for (float& b : lc.spec.bias) b = static_cast<float>(rng.next_in(-0.1, 0.1));
  }
  lc.weights_len = 4 * (lc.spec.weights.size() + lc.spec.bias.size());
  return lc;
}

// The 13-conv-layer geometry of the classic 224x224 image-classification
// stack, for simulation studies: conv blocks with 2x2 pooling between them
// (pools and the dense tail are type-2 master work).
inline std::vector<PipelineLayer> vgg16_like_layers() {
  struct Row {
    int c_in, c_out, hw;
  };
  static const Row rows[] = {
      {3, 64, 224},    {64, 64, 224},                     // block 1
      {64, 128, 112},  {128, 128, 112},                   // block 2
      {128, 256, 56},  {256, 256, 56},  {256, 256, 56},   // block 3
      {256, 512, 28},  {512, 512, 28},  {512, 512, 28},   // block 4
      {512, 512, 14},  {512, 512, 14},  {512, 512, 14},   // block 5
  };
  std::vector<PipelineLayer> out;
  int idx = 0;
  int block = 1;
  int in_block = 0;
  const int block_sizes[] = {2, 2, 3, 3, 3};
  for (const Row& r : rows) {
    ConvSpec spec;
    spec.in_channels = r.c_in;
    spec.out_channels = r.c_out;
    spec.kernel = 3;
    spec.stride = 1;
    spec.padding = 1;
    PipelineLayer pl;
    pl.distributed = true;
    pl.geom = LayerGeometry::from_spec(spec, r.hw, r.hw);
    pl.name = "conv" + std::to_string(++idx);
    out.push_back(pl);
    if (++in_block == block_sizes[block - 1]) {
      PipelineLayer pool;
      pool.distributed = false;
      pool.flops = static_cast<double>(r.c_out) * (r.hw / 2) * (r.hw / 2) * 4.0;
      pool.name = "pool" + std::to_string(block);
      out.push_back(pool);
      ++block;
      in_block = 0;
    }
  }
  for (const auto& [cin, cout, nm] :
       {std::tuple<int, int, const char*>{25088, 4096, "fc1"}, {4096, 4096, "fc2"},
        {4096, 1000, "fc3"}}) {
    PipelineLayer fc;
    fc.distributed = false;
    fc.flops = 2.0 * cin * cout;
    fc.name = nm;
    out.push_back(fc);
  }
  return out;
}

}  // namespace cocoi
