#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bfm {

using Vec = std::vector<double>;

// Training aborted because a loss or gradient became non-finite.
class divergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A persisted file failed validation (magic, version, checksum, truncation).
class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation requires a component the bundle does not carry (e.g. FRN sampling
// without a trained residual network).
class unsupported_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void check_same_dim(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
}

// Parameters and dataset values are persisted as little-endian f32; keeping
// the in-memory doubles on the f32 grid makes save/load round trips lossless.
// Defined out of line: gcc 11's SLP vectorizer turns inlined narrow-compute
// pairs into packed single-precision arithmetic, which changes the rounding.
double f32_round(double x);

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable per-role seed derivation from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ (0xa076'1d64'78bd'642fULL * (stream + 1)));
}

}  // namespace bfm
