#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "bfm/common.hpp"

namespace bfm {

// mt19937_64 with stateless Gaussian draws. std::normal_distribution caches a
// second variate across calls, which would make checkpointed RNG state
// incomplete; the explicit Box-Muller below consumes exactly two engine words
// per pair, so engine state alone fully captures the stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform() {  // [0, 1)
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  // inclusive bounds
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(engine_);
  }

  void normal_pair(double& z0, double& z1) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(a);
    z1 = r * std::sin(a);
  }

  // n independent N(0,1) draws; an odd n discards the spare variate so the
  // stream position is a pure function of the call sequence.
  Vec normal_vec(std::size_t n) {
    Vec out(n);
    for (std::size_t i = 0; i + 1 < n; i += 2) normal_pair(out[i], out[i + 1]);
    if (n % 2 == 1) {
      double z0, z1;
      normal_pair(z0, z1);
      out[n - 1] = z0;
    }
    return out;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) throw format_error("rng: malformed engine state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bfm
