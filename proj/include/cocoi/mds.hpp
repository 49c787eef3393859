#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cocoi/errors.hpp"

namespace cocoi {

// n x k Vandermonde generation matrix: row i is (g_i^{k-1}, ..., g_i^0), so
// any k rows form an invertible Vandermonde system as long as the nodes are
// pairwise distinct.
struct GenerationMatrix {
  int n = 0;
  int k = 0;
  std::vector<double> nodes;    // g_1..g_n
  std::vector<double> entries;  // row-major n x k

  const double* row(int i) const { return entries.data() + static_cast<std::size_t>(i) * k; }
};

// nodes g_i = i; integer nodes keep the entries exact at the scales we run
inline GenerationMatrix build_vandermonde(int n, int k) {
  if (k < 1 || n < k) throw std::invalid_argument("need 1 <= k <= n");
  GenerationMatrix g;
  g.n = n;
  g.k = k;
  g.nodes.resize(n);
  g.entries.resize(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    double node = static_cast<double>(i + 1);
    g.nodes[i] = node;
    double p = 1.0;
    for (int j = k - 1; j >= 0; --j) {
      g.entries[static_cast<std::size_t>(i) * k + j] = p;
      p *= node;
    }
  }
  return g;
}

// encoded vector j = sum_i G[j,i] * parts[i]; everything in double -- decoding
// amplifies input rounding by the condition number of the chosen submatrix,
// so the coded path must not drop to float in between
inline std::vector<std::vector<double>> mds_encode(const GenerationMatrix& g,
                                                   const std::vector<std::vector<double>>& parts) {
  if (static_cast<int>(parts.size()) != g.k)
    throw CodecError("expected " + std::to_string(g.k) + " parts, got " +
                     std::to_string(parts.size()));
  const std::size_t len = parts.empty() ? 0 : parts.front().size();
  for (const auto& p : parts)
    if (p.size() != len) throw CodecError("parts must have equal length");
  std::vector<std::vector<double>> out(g.n, std::vector<double>(len, 0.0));
  for (int j = 0; j < g.n; ++j) {
    const double* gr = g.row(j);
    double* oj = out[j].data();
    for (int i = 0; i < g.k; ++i) {
      const double c = gr[i];
      const double* pi = parts[i].data();
      for (std::size_t t = 0; t < len; ++t) oj[t] += c * pi[t];
    }
  }
  return out;
}

namespace detail {

// in-place partially pivoted Gaussian elimination of a (k x k | k x len)
// augmented system; throws on pivots below tol
inline void solve_gauss(std::vector<double>& a, std::vector<std::vector<double>>& rhs, int k,
                        double tol) {
  for (int col = 0; col < k; ++col) {
    int piv = col;
    double best = std::abs(a[static_cast<std::size_t>(col) * k + col]);
    for (int r = col + 1; r < k; ++r) {
      double v = std::abs(a[static_cast<std::size_t>(r) * k + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best < tol)
      throw CodecError("singular submatrix: pivot " + std::to_string(best) + " in column " +
                       std::to_string(col));
    if (piv != col) {
      for (int j = 0; j < k; ++j)
        std::swap(a[static_cast<std::size_t>(piv) * k + j], a[static_cast<std::size_t>(col) * k + j]);
      std::swap(rhs[piv], rhs[col]);
    }
    const double inv = 1.0 / a[static_cast<std::size_t>(col) * k + col];
    for (int r = col + 1; r < k; ++r) {
      const double f = a[static_cast<std::size_t>(r) * k + col] * inv;
      if (f == 0.0) continue;
      for (int j = col; j < k; ++j)
        a[static_cast<std::size_t>(r) * k + j] -= f * a[static_cast<std::size_t>(col) * k + j];
      double* rr = rhs[r].data();
      const double* rc = rhs[col].data();
      for (std::size_t t = 0; t < rhs[r].size(); ++t) rr[t] -= f * rc[t];
    }
  }
  for (int col = k - 1; col >= 0; --col) {
    const double inv = 1.0 / a[static_cast<std::size_t>(col) * k + col];
    double* rc = rhs[col].data();
    for (std::size_t t = 0; t < rhs[col].size(); ++t) rc[t] *= inv;
    for (int r = 0; r < col; ++r) {
      const double f = a[static_cast<std::size_t>(r) * k + col];
      if (f == 0.0) continue;
      double* rr = rhs[r].data();
      for (std::size_t t = 0; t < rhs[r].size(); ++t) rr[t] -= f * rc[t];
    }
  }
}

inline std::vector<double> submatrix(const GenerationMatrix& g, const std::vector<int>& s) {
  if (static_cast<int>(s.size()) != g.k)
    throw CodecError("subset size must equal k");
  std::vector<double> a(static_cast<std::size_t>(g.k) * g.k);
  for (int r = 0; r < g.k; ++r) {
    int idx = s[r];
    if (idx < 0 || idx >= g.n) throw CodecError("subset index out of range");
    for (int j = 0; j < g.k; ++j)
      a[static_cast<std::size_t>(r) * g.k + j] = g.row(idx)[j];
  }
  return a;
}

}  // namespace detail

// Recover the k source pieces from the outputs of the k workers whose
// (0-based) row indices are listed in s. outputs[r] corresponds to s[r].
inline std::vector<std::vector<double>> mds_decode(const GenerationMatrix& g,
                                                   const std::vector<int>& s,
                                                   std::vector<std::vector<double>> outputs) {
  if (outputs.size() != s.size()) throw CodecError("outputs count must match subset size");
  const std::size_t len = outputs.empty() ? 0 : outputs.front().size();
  for (const auto& o : outputs)
    if (o.size() != len) throw CodecError("outputs must have equal length");
  std::vector<double> a = detail::submatrix(g, s);
  detail::solve_gauss(a, outputs, g.k, 1e-12);
  return outputs;
}

// 1-norm condition number of G_S; numerical-health telemetry only (the
// Vandermonde conditioning grows fast in k, and callers should know)
inline double condition_estimate(const GenerationMatrix& g, const std::vector<int>& s) {
  std::vector<double> a = detail::submatrix(g, s);
  const int k = g.k;
  double norm_a = 0.0;
  for (int j = 0; j < k; ++j) {
    double col = 0.0;
    for (int r = 0; r < k; ++r) col += std::abs(a[static_cast<std::size_t>(r) * k + j]);
    if (col > norm_a) norm_a = col;
  }
  // explicit inverse via elimination against the identity; k stays small here
  std::vector<std::vector<double>> eye(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i) eye[i][i] = 1.0;
  try {
    detail::solve_gauss(a, eye, k, 1e-300);
  } catch (const CodecError&) {
    return std::numeric_limits<double>::infinity();
  }
  double norm_inv = 0.0;
  for (int j = 0; j < k; ++j) {
    double col = 0.0;
    for (int r = 0; r < k; ++r) col += std::abs(eye[r][j]);
    if (col > norm_inv) norm_inv = col;
  }
  return norm_a * norm_inv;
}

}  // namespace cocoi
