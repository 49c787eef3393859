#pragma once

#include <stdexcept>
#include <string>

namespace cocoi {

// invalid conv/tensor geometry (kernel larger than input, zero dims, ...)
struct GeometryError : std::invalid_argument {
  explicit GeometryError(const std::string& what) : std::invalid_argument(what) {}
};

// split request that no valid plan satisfies (k > W_O, k < 1, ...)
struct SplitError : std::invalid_argument {
  explicit SplitError(const std::string& what) : std::invalid_argument(what) {}
};

// encode/decode failures: singular submatrix, inconsistent symbols, length mismatch
struct CodecError : std::runtime_error {
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

// latency fit on degenerate samples (all equal -> mu unbounded)
struct FitError : std::runtime_error {
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

// malformed wire frame or message payload
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// a distributed layer could not be completed even after the retry round
struct LayerFailure : std::runtime_error {
  explicit LayerFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cocoi
