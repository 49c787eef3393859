#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cocoi/errors.hpp"
#include "cocoi/rng.hpp"

namespace cocoi {

// Robust Soliton degree distribution over 1..k. pmf[d-1] = P(degree = d).
struct DegreeDist {
  int k = 0;
  std::vector<double> pmf;
  std::vector<double> cdf;

  double mean() const {
    double m = 0.0;
    for (int d = 1; d <= k; ++d) m += d * pmf[d - 1];
    return m;
  }

  int sample(SplitMix64& rng) const {
    double u = rng.next_unit();
    // cdf is short (k entries); linear scan keeps this trivially correct
    for (int d = 1; d <= k; ++d)
      if (u <= cdf[d - 1]) return d;
    return k;
  }
};

// ideal soliton component: rho(1) = 1/k, rho(d) = 1/(d(d-1))
inline std::vector<double> ideal_soliton(int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<double> rho(k);
  rho[0] = 1.0 / k;
  for (int d = 2; d <= k; ++d) rho[d - 1] = 1.0 / (static_cast<double>(d) * (d - 1));
  return rho;
}

inline DegreeDist robust_soliton(int k, double c = 0.03, double delta = 0.5) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (c <= 0 || delta <= 0 || delta >= 1) throw std::invalid_argument("need c > 0, 0 < delta < 1");
  DegreeDist dist;
  dist.k = k;
  if (k == 1) {
    dist.pmf = {1.0};
    dist.cdf = {1.0};
    return dist;
  }
  const double r = c * std::log(static_cast<double>(k) / delta) * std::sqrt(static_cast<double>(k));
  std::vector<double> rho = ideal_soliton(k);
  std::vector<double> tau(k, 0.0);
  const int cap = static_cast<int>(std::floor(static_cast<double>(k) / r));
  for (int d = 1; d < cap && d <= k; ++d) tau[d - 1] = r / (static_cast<double>(d) * k);
  if (cap >= 1 && cap <= k) tau[cap - 1] = r * std::log(r / delta) / k;
  double beta = 0.0;
  for (int d = 1; d <= k; ++d) beta += rho[d - 1] + tau[d - 1];
  dist.pmf.resize(k);
  dist.cdf.resize(k);
  double acc = 0.0;
  for (int d = 1; d <= k; ++d) {
    dist.pmf[d - 1] = (rho[d - 1] + tau[d - 1]) / beta;
    acc += dist.pmf[d - 1];
    dist.cdf[d - 1] = acc;
  }
  dist.cdf[k - 1] = 1.0;
  return dist;
}

// One rateless symbol: the GF(2) combination mask over the k sources (bit i
// set means source i participates) plus the summed real payload.
struct EncodedSymbol {
  int k = 0;
  std::vector<std::uint64_t> mask;  // ceil(k/64) words, little-endian bit order
  std::vector<double> payload;

  int degree() const {
    int d = 0;
    for (std::uint64_t w : mask) d += static_cast<int>(std::popcount(w));
    return d;
  }
};

namespace detail {

inline std::size_t mask_words(int k) { return (static_cast<std::size_t>(k) + 63) / 64; }

inline void set_bit(std::vector<std::uint64_t>& mask, int i) {
  mask[static_cast<std::size_t>(i) >> 6] |= (1ull << (i & 63));
}

inline int highest_bit(const std::vector<std::uint64_t>& mask) {
  for (std::size_t w = mask.size(); w-- > 0;)
    if (mask[w]) return static_cast<int>(w * 64 + 63 - std::countl_zero(mask[w]));
  return -1;
}

// arithmetic modulo the Mersenne prime 2^61 - 1 (headroom for __int128 products)
constexpr std::uint64_t kP61 = (1ull << 61) - 1;

inline std::uint64_t mulmod_p61(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % kP61);
}

inline std::uint64_t submod_p61(std::uint64_t a, std::uint64_t b) {
  return a >= b ? a - b : a + kP61 - b;
}

inline std::uint64_t invmod_p61(std::uint64_t a) {
  std::uint64_t r = 1, e = kP61 - 2;
  while (e) {
    if (e & 1) r = mulmod_p61(r, a);
    a = mulmod_p61(a, a);
    e >>= 1;
  }
  return r;
}

}  // namespace detail

// Streaming LT encoder over k equal-length source vectors: every next()
// samples a Robust Soliton degree, picks that many distinct sources, and
// emits their mask and summed payload. A fixed seed fixes the whole stream.
class LtEncoder {
 public:
  LtEncoder(std::vector<std::vector<double>> sources, DegreeDist dist, std::uint64_t seed)
      : sources_(std::move(sources)), dist_(std::move(dist)), rng_(seed) {
    if (sources_.empty() || static_cast<int>(sources_.size()) != dist_.k)
      throw CodecError("source count must equal the distribution's k");
    len_ = sources_.front().size();
    for (const auto& s : sources_)
      if (s.size() != len_) throw CodecError("sources must have equal length");
    pick_.resize(sources_.size());
    std::iota(pick_.begin(), pick_.end(), 0);
  }

  int k() const { return dist_.k; }

  EncodedSymbol next() {
    const int k = dist_.k;
    const int d = dist_.sample(rng_);
    // partial Fisher-Yates over the index buffer picks d distinct sources
    for (int i = 0; i < d; ++i) {
      std::uint32_t j = i + rng_.next_below(static_cast<std::uint32_t>(k - i));
      std::swap(pick_[i], pick_[j]);
    }
    EncodedSymbol sym;
    sym.k = k;
    sym.mask.assign(detail::mask_words(k), 0);
    sym.payload.assign(len_, 0.0);
    for (int i = 0; i < d; ++i) {
      detail::set_bit(sym.mask, pick_[i]);
      const double* src = sources_[pick_[i]].data();
      for (std::size_t t = 0; t < len_; ++t) sym.payload[t] += src[t];
    }
    return sym;
  }

 private:
  std::vector<std::vector<double>> sources_;
  DegreeDist dist_;
  SplitMix64 rng_;
  std::vector<int> pick_;
  std::size_t len_ = 0;
};

// Incremental decoder. Rank/completeness is judged over GF(2) on the masks
// (combinations that are only independent over the reals are conservatively
// rejected, matching standard LT decoders), while the accepted symbols are
// kept verbatim; recover() then solves the real k-by-k system those originals
// define. Mirroring GF(2) row XORs with payload subtraction is NOT sound in
// general -- a mask bit cancels whenever its integer coefficient goes even,
// not zero -- so corruption checking is limited to the verifiable case: a
// symbol whose mask repeats an accepted one must repeat its payload too.
class LtDecoder {
 public:
  LtDecoder(int k, std::size_t payload_len) : k_(k), len_(payload_len) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    basis_.resize(k);
  }

  int rank() const { return static_cast<int>(accepted_.size()); }
  bool complete() const { return rank() == k_; }

  // returns true when the symbol increased the rank
  bool add(EncodedSymbol sym) {
    if (sym.k != k_ || sym.mask.size() != detail::mask_words(k_) || sym.payload.size() != len_)
      throw CodecError("symbol shape mismatch");
    for (const Accepted& a : accepted_) {
      if (a.mask != sym.mask) continue;
      double scale = 1.0;
      for (double v : a.payload) scale = std::max(scale, std::abs(v));
      for (std::size_t t = 0; t < len_; ++t)
        if (std::abs(sym.payload[t] - a.payload[t]) > 1e-6 * scale)
          throw CodecError("inconsistent duplicate symbol (payload mismatch)");
      return false;
    }
    std::vector<std::uint64_t> red = sym.mask;
    while (true) {
      int piv = detail::highest_bit(red);
      if (piv < 0) return false;  // GF(2)-dependent; rank unchanged
      if (basis_[piv].empty()) {
        basis_[piv] = std::move(red);
        accepted_.push_back({std::move(sym.mask), std::move(sym.payload)});
        return true;
      }
      for (std::size_t w = 0; w < red.size(); ++w) red[w] ^= basis_[piv][w];
    }
  }

  // Solve the k accepted originals for the sources. Integer payloads take an
  // exact path (modular elimination plus a verified lift) and round-trip
  // bitwise; everything else goes through LU with partial pivoting and
  // long-double-residual refinement. Idempotent -- the accepted symbols are
  // not consumed.
  std::vector<std::vector<double>> recover() const {
    if (!complete()) throw CodecError("need more symbols: rank " + std::to_string(rank()) +
                                      " of " + std::to_string(k_));
    if (auto exact = recover_integer_(); !exact.empty()) return exact;
    const std::size_t n = static_cast<std::size_t>(k_);
    std::vector<double> lu(n * n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        lu[r * n + c] = (accepted_[r].mask[c >> 6] >> (c & 63)) & 1ull ? 1.0 : 0.0;
    const std::vector<double> a0 = lu;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t best = col;
      for (std::size_t r = col + 1; r < n; ++r)
        if (std::abs(lu[r * n + col]) > std::abs(lu[best * n + col])) best = r;
      if (lu[best * n + col] == 0.0)
        throw CodecError("mask matrix singular over the reals");  // cannot happen at GF(2) rank k
      if (best != col) {
        for (std::size_t c = 0; c < n; ++c) std::swap(lu[col * n + c], lu[best * n + c]);
        std::swap(perm[col], perm[best]);
      }
      for (std::size_t r = col + 1; r < n; ++r) {
        const double m = lu[r * n + col] / lu[col * n + col];
        lu[r * n + col] = m;
        for (std::size_t c = col + 1; c < n; ++c) lu[r * n + c] -= m * lu[col * n + c];
      }
    }
    auto solve = [&](std::vector<double>& x, const std::vector<double>& b) {
      for (std::size_t r = 0; r < n; ++r) {
        double v = b[perm[r]];
        for (std::size_t c = 0; c < r; ++c) v -= lu[r * n + c] * x[c];
        x[r] = v;
      }
      for (std::size_t r = n; r-- > 0;) {
        double v = x[r];
        for (std::size_t c = r + 1; c < n; ++c) v -= lu[r * n + c] * x[c];
        x[r] = v / lu[r * n + r];
      }
    };
    std::vector<std::vector<double>> out(n, std::vector<double>(len_));
    std::vector<double> b(n), x(n), d(n);
    for (std::size_t t = 0; t < len_; ++t) {
      for (std::size_t r = 0; r < n; ++r) b[r] = accepted_[r].payload[t];
      solve(x, b);
      for (int pass = 0; pass < 4; ++pass) {
        // residual accumulated in long double: the extra mantissa keeps the
        // integer and the error parts of each term separated, so refinement
        // converges onto exactly representable solutions instead of stalling
        // at the double-precision noise floor
        std::vector<double> res(n);
        double worst = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          long double v = b[r];
          for (std::size_t c = 0; c < n; ++c)
            v -= static_cast<long double>(a0[r * n + c]) * x[c];
          res[r] = static_cast<double>(v);
          worst = std::max(worst, std::abs(res[r]));
        }
        if (worst == 0.0) break;
        solve(d, res);
        for (std::size_t r = 0; r < n; ++r) x[r] += d[r];
      }
      for (std::size_t r = 0; r < n; ++r) out[r][t] = x[r];
    }
    return out;
  }

 private:
  struct Accepted {
    std::vector<std::uint64_t> mask;
    std::vector<double> payload;
  };

  // Exact solve for integral payloads: eliminate the 0/1 system modulo the
  // prime 2^61 - 1 and lift residues to the symmetric range. The mask matrix
  // is nonsingular over GF(2), so its determinant is odd and the modular
  // solve only degenerates if the prime divides it. When the true solution
  // is integral and fits a double, it equals the lift; the exact residual
  // check at the end rejects every other case (non-integral true solution,
  // oversized lift, unlucky prime) and returns empty so recover() falls back
  // to floating point. Refinement can't do this job: a wrong bit sitting in
  // an entry whose true value is 0 is far below the ulp of the integer
  // partial sums, so its residual rounds to exactly zero.
  std::vector<std::vector<double>> recover_integer_() const {
    const std::size_t n = static_cast<std::size_t>(k_);
    // bounds keep every intermediate of the residual check an exact integer
    // in long double (64-bit mantissa): (n + 1) * 2^53 < 2^64
    constexpr double kMaxExact = 9007199254740992.0;  // 2^53
    if (n > 1024) return {};
    for (const Accepted& a : accepted_)
      for (double v : a.payload)
        if (!(std::abs(v) <= kMaxExact) || v != std::nearbyint(v)) return {};
    const std::size_t m = n + len_;
    std::vector<std::uint64_t> aug(n * m);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c)
        aug[r * m + c] = (accepted_[r].mask[c >> 6] >> (c & 63)) & 1ull;
      for (std::size_t t = 0; t < len_; ++t) {
        const long long v = static_cast<long long>(accepted_[r].payload[t]);
        aug[r * m + n + t] =
            static_cast<std::uint64_t>(v < 0 ? v + static_cast<long long>(detail::kP61) : v);
      }
    }
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      while (piv < n && aug[piv * m + col] == 0) ++piv;
      if (piv == n) return {};  // prime divides the (odd) determinant
      if (piv != col)
        for (std::size_t c = col; c < m; ++c) std::swap(aug[col * m + c], aug[piv * m + c]);
      const std::uint64_t inv = detail::invmod_p61(aug[col * m + col]);
      for (std::size_t c = col; c < m; ++c)
        aug[col * m + c] = detail::mulmod_p61(aug[col * m + c], inv);
      for (std::size_t r = col + 1; r < n; ++r) {
        const std::uint64_t f = aug[r * m + col];
        if (f == 0) continue;
        for (std::size_t c = col; c < m; ++c)
          aug[r * m + c] = detail::submod_p61(aug[r * m + c], detail::mulmod_p61(f, aug[col * m + c]));
      }
    }
    for (std::size_t col = n; col-- > 0;)
      for (std::size_t r = 0; r < col; ++r) {
        const std::uint64_t f = aug[r * m + col];
        if (f == 0) continue;
        for (std::size_t t = 0; t < len_; ++t)
          aug[r * m + n + t] =
              detail::submod_p61(aug[r * m + n + t], detail::mulmod_p61(f, aug[col * m + n + t]));
      }
    std::vector<std::vector<double>> out(n, std::vector<double>(len_));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t t = 0; t < len_; ++t) {
        const std::uint64_t res = aug[r * m + n + t];
        const long long lifted =
            res > detail::kP61 / 2 ? static_cast<long long>(res) - static_cast<long long>(detail::kP61)
                                   : static_cast<long long>(res);
        if (std::abs(static_cast<double>(lifted)) > kMaxExact) return {};
        out[r][t] = static_cast<double>(lifted);
      }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t t = 0; t < len_; ++t) {
        long double v = accepted_[r].payload[t];
        for (std::size_t c = 0; c < n; ++c)
          if ((accepted_[r].mask[c >> 6] >> (c & 63)) & 1ull) v -= out[c][t];
        if (v != 0.0L) return {};
      }
    return out;
  }

  int k_;
  std::size_t len_;
  std::vector<std::vector<std::uint64_t>> basis_;  // reduced masks, pivot-indexed
  std::vector<Accepted> accepted_;                 // originals, arrival order
};

// number of fresh symbols until the masks alone reach rank k (payloads not
// materialized); the overhead statistic of the codec
inline int lt_overhead_trial(int k, const DegreeDist& dist, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::vector<std::uint64_t>> basis(k);
  std::vector<int> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  int rank = 0, count = 0;
  while (rank < k) {
    ++count;
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
  }
  return count;
}

// --- wire form ---------------------------------------------------------------
// k-bit mask padded to whole bytes (little-endian bit order), then the payload
// as float32 little-endian; carried inside runtime frames when LT is in play.

inline std::vector<std::uint8_t> serialize_symbol(const EncodedSymbol& sym) {
  std::vector<std::uint8_t> out;
  const std::size_t mask_bytes = (static_cast<std::size_t>(sym.k) + 7) / 8;
  out.reserve(mask_bytes + 4 * sym.payload.size());
  for (std::size_t b = 0; b < mask_bytes; ++b)
    out.push_back(static_cast<std::uint8_t>(sym.mask[b >> 3] >> ((b & 7) * 8)));
  for (double v : sym.payload) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    static_assert(sizeof(bits) == sizeof(f));
    std::memcpy(&bits, &f, 4);
    out.push_back(static_cast<std::uint8_t>(bits));
    out.push_back(static_cast<std::uint8_t>(bits >> 8));
    out.push_back(static_cast<std::uint8_t>(bits >> 16));
    out.push_back(static_cast<std::uint8_t>(bits >> 24));
  }
  return out;
}

inline EncodedSymbol parse_symbol(int k, const std::uint8_t* p, std::size_t len) {
  const std::size_t mask_bytes = (static_cast<std::size_t>(k) + 7) / 8;
  if (len < mask_bytes || (len - mask_bytes) % 4 != 0)
    throw ProtocolError("bad encoded-symbol length");
  EncodedSymbol sym;
  sym.k = k;
  sym.mask.assign(detail::mask_words(k), 0);
  for (std::size_t b = 0; b < mask_bytes; ++b)
    sym.mask[b >> 3] |= static_cast<std::uint64_t>(p[b]) << ((b & 7) * 8);
  if (k % 8 != 0 && (p[mask_bytes - 1] >> (k % 8)) != 0)
    throw ProtocolError("encoded-symbol mask has bits beyond k");
  const std::size_t count = (len - mask_bytes) / 4;
  sym.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[mask_bytes + 4 * i]) |
                         (static_cast<std::uint32_t>(p[mask_bytes + 4 * i + 1]) << 8) |
                         (static_cast<std::uint32_t>(p[mask_bytes + 4 * i + 2]) << 16) |
                         (static_cast<std::uint32_t>(p[mask_bytes + 4 * i + 3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    sym.payload[i] = f;
  }
  return sym;
}

}  // namespace cocoi
