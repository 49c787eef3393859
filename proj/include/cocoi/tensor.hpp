#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cocoi/errors.hpp"

namespace cocoi {

struct Dims4 {
  std::uint32_t b = 0, c = 0, h = 0, w = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(b) * c * h * w;
  }
  bool operator==(const Dims4&) const = default;
};

// Dense batch-major (B, C, H, W) tensor. Value type is a template parameter:
// payloads and the on-disk/wire container are float, while the coded path
// runs in double end to end (decoding amplifies rounding by the Vandermonde
// condition number, so encoded activations must not pass through float).
// Instances are immutable after construction.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  TensorT(Dims4 dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (dims_.count() == 0)
      throw GeometryError("tensor dims must all be positive");
    if (data_.size() != dims_.count())
      throw GeometryError("tensor data length " + std::to_string(data_.size()) +
                          " does not match dims count " + std::to_string(dims_.count()));
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v)))
        throw GeometryError("tensor data must be finite");
  }

  static TensorT zeros(Dims4 dims) {
    return TensorT(dims, std::vector<T>(dims.count(), T{0}));
  }

  const Dims4& dims() const { return dims_; }
  std::uint32_t b() const { return dims_.b; }
  std::uint32_t c() const { return dims_.c; }
  std::uint32_t h() const { return dims_.h; }
  std::uint32_t w() const { return dims_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  const std::vector<T>& data() const { return data_; }
  const T* raw() const { return data_.data(); }

  T at(std::size_t bi, std::size_t ci, std::size_t y, std::size_t x) const {
    return data_[((bi * dims_.c + ci) * dims_.h + y) * dims_.w + x];
  }

  bool operator==(const TensorT&) const = default;

 private:
  Dims4 dims_;
  std::vector<T> data_;
};

using Tensor4 = TensorT<float>;
using Tensor4d = TensorT<double>;

template <typename To, typename From>
TensorT<To> convert(const TensorT<From>& x) {
  std::vector<To> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<To>(x.data()[i]);
  return TensorT<To>(x.dims(), std::move(out));
}

// Square-kernel conv layer description. weights is (C_O, C_I, K, K);
// empty bias means none.
template <typename T>
struct ConvSpecT {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  TensorT<T> weights;
  std::vector<T> bias;

  void validate() const {
    if (in_channels < 1 || out_channels < 1)
      throw GeometryError("channel counts must be positive");
    if (kernel < 1 || stride < 1 || padding < 0)
      throw GeometryError("kernel/stride must be >= 1, padding >= 0");
    Dims4 want{static_cast<std::uint32_t>(out_channels), static_cast<std::uint32_t>(in_channels),
               static_cast<std::uint32_t>(kernel), static_cast<std::uint32_t>(kernel)};
    if (!(weights.dims() == want))
      throw GeometryError("weight dims do not match (C_O, C_I, K, K)");
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels))
      throw GeometryError("bias length must equal out_channels");
  }
};

using ConvSpec = ConvSpecT<float>;
using ConvSpecd = ConvSpecT<double>;

template <typename To, typename From>
ConvSpecT<To> convert_spec(const ConvSpecT<From>& s) {
  ConvSpecT<To> out;
  out.in_channels = s.in_channels;
  out.out_channels = s.out_channels;
  out.kernel = s.kernel;
  out.stride = s.stride;
  out.padding = s.padding;
  out.weights = convert<To>(s.weights);
  out.bias.assign(s.bias.begin(), s.bias.end());
  return out;
}

// output extent of a strided sliding window along one axis (input already padded)
inline int output_extent(int extent, int kernel, int stride) {
  if (kernel < 1 || stride < 1)
    throw GeometryError("kernel/stride must be >= 1");
  if (extent < kernel)
    throw GeometryError("input extent " + std::to_string(extent) +
                        " smaller than kernel " + std::to_string(kernel));
  return (extent - kernel) / stride + 1;
}

template <typename T>
std::pair<int, int> output_hw(const ConvSpecT<T>& spec, int h_in, int w_in) {
  return {output_extent(h_in, spec.kernel, spec.stride),
          output_extent(w_in, spec.kernel, spec.stride)};
}

// zero padding of p on every spatial border
template <typename T>
TensorT<T> pad(const TensorT<T>& x, int p) {
  if (p < 0) throw GeometryError("padding must be >= 0");
  if (p == 0) return x;
  Dims4 d = x.dims();
  Dims4 out{d.b, d.c, d.h + 2u * p, d.w + 2u * p};
  std::vector<T> data(out.count(), T{0});
  for (std::uint32_t bi = 0; bi < d.b; ++bi)
    for (std::uint32_t ci = 0; ci < d.c; ++ci)
      for (std::uint32_t y = 0; y < d.h; ++y) {
        const T* src = x.raw() + ((static_cast<std::size_t>(bi) * d.c + ci) * d.h + y) * d.w;
        T* dst = data.data() +
                 ((static_cast<std::size_t>(bi) * out.c + ci) * out.h + (y + p)) * out.w + p;
        std::memcpy(dst, src, sizeof(T) * d.w);
      }
  return TensorT<T>(out, std::move(data));
}

// Direct conv over an already-padded input. Accumulation order per output
// element is fixed (ci, then ky, then kx ascending) so independent
// implementations can be compared bit for bit.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvSpecT<T>& spec, bool with_bias = true) {
  spec.validate();
  if (x.c() != static_cast<std::uint32_t>(spec.in_channels))
    throw GeometryError("input channels do not match spec");
  const int k = spec.kernel, s = spec.stride;
  const int ho = output_extent(static_cast<int>(x.h()), k, s);
  const int wo = output_extent(static_cast<int>(x.w()), k, s);
  const std::size_t ci_n = x.c(), hi = x.h(), wi = x.w();
  Dims4 out{x.b(), static_cast<std::uint32_t>(spec.out_channels),
            static_cast<std::uint32_t>(ho), static_cast<std::uint32_t>(wo)};
  std::vector<T> data(out.count());
  const T* wp = spec.weights.raw();
  std::size_t idx = 0;
  for (std::uint32_t bi = 0; bi < x.b(); ++bi) {
    const T* xb = x.raw() + static_cast<std::size_t>(bi) * ci_n * hi * wi;
    for (int co = 0; co < spec.out_channels; ++co) {
      const T* wco = wp + static_cast<std::size_t>(co) * ci_n * k * k;
      const T b = (with_bias && !spec.bias.empty()) ? spec.bias[co] : T{0};
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          T acc{0};
          for (std::size_t ci = 0; ci < ci_n; ++ci) {
            const T* xc = xb + ci * hi * wi + static_cast<std::size_t>(oy) * s * wi + static_cast<std::size_t>(ox) * s;
            const T* wc = wco + ci * k * k;
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx)
                acc += xc[static_cast<std::size_t>(ky) * wi + kx] * wc[ky * k + kx];
          }
          data[idx++] = acc + b;
        }
      }
    }
  }
  return TensorT<T>(out, std::move(data));
}

// columns [a, b) of every (batch, channel, row)
template <typename T>
TensorT<T> slice_width(const TensorT<T>& x, int a, int b) {
  if (a < 0 || b <= a || b > static_cast<int>(x.w()))
    throw GeometryError("bad width slice [" + std::to_string(a) + ", " + std::to_string(b) + ")");
  Dims4 d = x.dims();
  Dims4 out{d.b, d.c, d.h, static_cast<std::uint32_t>(b - a)};
  std::vector<T> data(out.count());
  std::size_t rows = static_cast<std::size_t>(d.b) * d.c * d.h;
  for (std::size_t r = 0; r < rows; ++r)
    std::memcpy(data.data() + r * out.w, x.raw() + r * d.w + a, sizeof(T) * out.w);
  return TensorT<T>(out, std::move(data));
}

// glue width-wise; all pieces must agree on (B, C, H)
template <typename T>
TensorT<T> concat_width(const std::vector<TensorT<T>>& pieces) {
  if (pieces.empty()) throw GeometryError("concat of zero pieces");
  Dims4 d0 = pieces.front().dims();
  std::uint32_t w_total = 0;
  for (const auto& p : pieces) {
    if (p.b() != d0.b || p.c() != d0.c || p.h() != d0.h)
      throw GeometryError("concat pieces disagree on (B, C, H)");
    w_total += p.w();
  }
  Dims4 out{d0.b, d0.c, d0.h, w_total};
  std::vector<T> data(out.count());
  std::size_t rows = static_cast<std::size_t>(d0.b) * d0.c * d0.h;
  std::size_t off = 0;
  for (const auto& p : pieces) {
    for (std::size_t r = 0; r < rows; ++r)
      std::memcpy(data.data() + r * w_total + off, p.raw() + r * p.w(), sizeof(T) * p.w());
    off += p.w();
  }
  return TensorT<T>(out, std::move(data));
}

// row-major copy-out / copy-in; the codec works on flat vectors
template <typename T>
std::vector<T> flatten(const TensorT<T>& x) {
  return x.data();
}

template <typename T>
TensorT<T> restore(std::vector<T> data, Dims4 dims) {
  return TensorT<T>(dims, std::move(data));
}

// Width-split assumes the split axis is W; models whose natural split axis is
// H can be transposed on the way in and out instead of duplicating the
// splitter. Square kernels make the weight transpose a per-map transpose.
template <typename T>
TensorT<T> transpose_hw(const TensorT<T>& x) {
  Dims4 d = x.dims();
  Dims4 out{d.b, d.c, d.w, d.h};
  std::vector<T> data(out.count());
  for (std::uint32_t bi = 0; bi < d.b; ++bi)
    for (std::uint32_t ci = 0; ci < d.c; ++ci) {
      const T* src = x.raw() + (static_cast<std::size_t>(bi) * d.c + ci) * d.h * d.w;
      T* dst = data.data() + (static_cast<std::size_t>(bi) * d.c + ci) * d.h * d.w;
      for (std::uint32_t y = 0; y < d.h; ++y)
        for (std::uint32_t xx = 0; xx < d.w; ++xx)
          dst[static_cast<std::size_t>(xx) * d.h + y] = src[static_cast<std::size_t>(y) * d.w + xx];
    }
  return TensorT<T>(out, std::move(data));
}

template <typename T>
ConvSpecT<T> transpose_spec(const ConvSpecT<T>& s) {
  ConvSpecT<T> out = s;
  out.weights = transpose_hw(s.weights);
  return out;
}

// --- binary tensor container -------------------------------------------------
// Header: magic "CCT1", then B, C, H, W as u32 little-endian (20 bytes total),
// then B*C*H*W float32 little-endian values. This is the only persistent/wire
// tensor form, and it is always float32.

inline constexpr char kTensorMagic[4] = {'C', 'C', 'T', '1'};

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_tensor(const Tensor4& x) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 4 * x.size());
  out.insert(out.end(), kTensorMagic, kTensorMagic + 4);
  detail::put_u32le(out, x.b());
  detail::put_u32le(out, x.c());
  detail::put_u32le(out, x.h());
  detail::put_u32le(out, x.w());
  for (float v : x.data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    detail::put_u32le(out, bits);
  }
  return out;
}

inline constexpr std::size_t kTensorHeaderBytes = 20;  // magic + 4 dims

inline Tensor4 parse_tensor(const std::uint8_t* p, std::size_t len) {
  if (len < kTensorHeaderBytes || std::memcmp(p, kTensorMagic, 4) != 0)
    throw ProtocolError("bad tensor container header");
  Dims4 d{detail::get_u32le(p + 4), detail::get_u32le(p + 8), detail::get_u32le(p + 12),
          detail::get_u32le(p + 16)};
  if (d.count() == 0 || d.count() > (1u << 28))
    throw ProtocolError("tensor container dims out of range");
  if (len != kTensorHeaderBytes + 4 * d.count())
    throw ProtocolError("tensor container length mismatch");
  std::vector<float> data(d.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = detail::get_u32le(p + kTensorHeaderBytes + 4 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    data[i] = v;
  }
  return Tensor4(d, std::move(data));
}

inline Tensor4 parse_tensor(const std::vector<std::uint8_t>& bytes) {
  return parse_tensor(bytes.data(), bytes.size());
}

inline void save_tensor(const std::string& path, const Tensor4& x) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  auto bytes = serialize_tensor(x);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

inline Tensor4 load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_tensor(bytes);
}

}  // namespace cocoi
