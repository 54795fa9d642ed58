#pragma once
// ============================================================================
// Shared basics: scalar type, error hierarchy, a small dense matrix, and a
// few numeric helpers used across the library.
// ============================================================================

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lyt {

// All internal numerics are 64-bit; file formats quantize to f32 where noted.
using real = double;

// ---------------------------------------------------------------------------
// Error hierarchy. The CLI maps these onto process exit codes:
//   ConfigError -> 2, NumericError (and subclasses) -> 3, IoError -> 4.
// ---------------------------------------------------------------------------
struct Error : std::runtime_error {
  explicit Error(const std::string& m) : std::runtime_error(m) {}
};

// Invalid user-facing configuration (bad field values, inconsistent shapes
// requested in a config file, unknown keys).
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(m) {}
};

// Violated runtime numeric contract (non-finite loss, diverging field, ...).
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(m) {}
};

// Tensor/matrix shape mismatch in an operation.
struct DimensionError : NumericError {
  explicit DimensionError(const std::string& m) : NumericError(m) {}
};

// An API precondition (other than a pure shape check) was violated.
struct ContractError : NumericError {
  explicit ContractError(const std::string& m) : NumericError(m) {}
};

// Reaching a mathematical singularity (e.g. pendulum radius collapsing to 0).
struct SingularityError : NumericError {
  explicit SingularityError(const std::string& m) : NumericError(m) {}
};

// Estimator input that carries no usable signal (zero variance, all points
// identical, zero trajectory diameter).
struct DegenerateInputError : NumericError {
  explicit DegenerateInputError(const std::string& m) : NumericError(m) {}
};

// Filesystem / serialization failure.
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(m) {}
};

// ---------------------------------------------------------------------------
// Minimal dense row-major matrix for plain (non-autodiff) numerics: probe
// fits, latent tables, trajectory state blocks.
// ---------------------------------------------------------------------------
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<real> v;  // rows*cols, row-major

  Mat() = default;
  Mat(std::size_t r, std::size_t c, real fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  real& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  real operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  const real* row(std::size_t r) const { return v.data() + r * cols; }
  real* row(std::size_t r) { return v.data() + r * cols; }

  Mat col(std::size_t c) const {
    Mat out(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) out(r, 0) = (*this)(r, c);
    return out;
  }
  Mat select_cols(const std::vector<std::size_t>& idx) const {
    Mat out(rows, idx.size());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < idx.size(); ++j) out(r, j) = (*this)(r, idx[j]);
    return out;
  }
};

inline bool all_finite(const std::vector<real>& v) {
  for (real x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

// Round a double to the nearest value representable in IEEE-754 binary32.
// Model parameters live on this grid so that f32 checkpoints round-trip
// bit-exactly and resumed runs match uninterrupted ones.
inline real to_f32_grid(real x) { return static_cast<real>(static_cast<float>(x)); }

// FNV-1a 64-bit hash; used for config hashes stamped into output files and
// for checkpoint checksums.
inline std::uint64_t fnv1a64(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace lyt
