#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocoi/errors.hpp"
#include "cocoi/tensor.hpp"

namespace cocoi {

// Half-open, zero-based output-column range of one piece together with the
// input-column range it depends on.
struct PieceRange {
  int a_out = 0, b_out = 0;  // output columns [a_out, b_out)
  int a_in = 0, b_in = 0;    // input columns [a_in, b_in)

  int w_out() const { return b_out - a_out; }
  int w_in() const { return b_in - a_in; }
  bool operator==(const PieceRange&) const = default;
};

// k equal-width worker pieces plus an optional remainder strip (the last
// mod(W_O, k) output columns) that the master executes locally.
struct SplitPlan {
  int k = 0;
  int w_in = 0;   // padded input width the plan was built for
  int w_out = 0;  // total output width
  std::vector<PieceRange> pieces;
  std::optional<PieceRange> remainder;
};

// minimal input-column interval read by every kernel placement that produces
// output columns [a_out, b_out); brute force over placements, used as the
// verification oracle for the closed-form ranges
inline std::pair<int, int> dependency_oracle(int kernel, int stride, int a_out, int b_out) {
  if (kernel < 1 || stride < 1 || a_out < 0 || b_out <= a_out)
    throw GeometryError("bad dependency query");
  int lo = a_out * stride;
  int hi = lo + kernel;
  for (int o = a_out; o < b_out; ++o) {
    int left = o * stride;
    if (left < lo) lo = left;
    if (left + kernel > hi) hi = left + kernel;
  }
  return {lo, hi};
}

template <typename T>
std::pair<int, int> dependency_oracle(const ConvSpecT<T>& spec, std::pair<int, int> output_range) {
  return dependency_oracle(spec.kernel, spec.stride, output_range.first, output_range.second);
}

inline PieceRange make_piece(int kernel, int stride, int a_out, int b_out) {
  PieceRange p;
  p.a_out = a_out;
  p.b_out = b_out;
  p.a_in = a_out * stride;
  p.b_in = (b_out - 1) * stride + kernel;
  return p;
}

// Equal k-way split of the output width; computed on the padded input width.
inline SplitPlan plan_split(int kernel, int stride, int w_in_padded, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const int w_out = output_extent(w_in_padded, kernel, stride);
  if (k > w_out)
    throw SplitError("infeasible split: k = " + std::to_string(k) + " exceeds W_O = " +
                     std::to_string(w_out));
  SplitPlan plan;
  plan.k = k;
  plan.w_in = w_in_padded;
  plan.w_out = w_out;
  const int piece_w = w_out / k;
  for (int i = 0; i < k; ++i)
    plan.pieces.push_back(make_piece(kernel, stride, i * piece_w, (i + 1) * piece_w));
  if (w_out % k != 0)
    plan.remainder = make_piece(kernel, stride, k * piece_w, w_out);
  return plan;
}

template <typename T>
SplitPlan plan_split(const ConvSpecT<T>& spec, int w_in_padded, int k) {
  return plan_split(spec.kernel, spec.stride, w_in_padded, k);
}

inline nlohmann::json to_json(const PieceRange& p) {
  return {{"a_O", p.a_out}, {"b_O", p.b_out},   {"a_I", p.a_in},
          {"b_I", p.b_in},  {"W_O_p", p.w_out()}, {"W_I_p", p.w_in()}};
}

inline nlohmann::json to_json(const SplitPlan& plan) {
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& p : plan.pieces) pieces.push_back(to_json(p));
  nlohmann::json j{{"k", plan.k}, {"W_I", plan.w_in}, {"W_O", plan.w_out}, {"pieces", pieces}};
  if (plan.remainder) j["remainder"] = to_json(*plan.remainder);
  return j;
}

inline PieceRange piece_from_json(const nlohmann::json& j) {
  PieceRange p;
  p.a_out = j.at("a_O").get<int>();
  p.b_out = j.at("b_O").get<int>();
  p.a_in = j.at("a_I").get<int>();
  p.b_in = j.at("b_I").get<int>();
  return p;
}

inline SplitPlan plan_from_json(const nlohmann::json& j) {
  SplitPlan plan;
  plan.k = j.at("k").get<int>();
  plan.w_in = j.at("W_I").get<int>();
  plan.w_out = j.at("W_O").get<int>();
  for (const auto& pj : j.at("pieces")) plan.pieces.push_back(piece_from_json(pj));
  if (j.contains("remainder")) plan.remainder = piece_from_json(j["remainder"]);
  return plan;
}

}  // namespace cocoi
