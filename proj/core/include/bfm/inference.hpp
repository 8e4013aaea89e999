#pragma once

#include <cstdint>

#include "bfm/flops.hpp"
#include "bfm/models.hpp"
#include "bfm/sample_set.hpp"

namespace bfm {

enum class SamplerMode { FullAlign, ResidualApprox };

struct SamplerConfig {
  int steps_per_segment = 41;  // K; total solver steps = M*K
  GuidanceConfig guidance;     // w = 1 runs the conditional pass only
  SamplerMode mode = SamplerMode::FullAlign;
  int n_samples = 1;
  std::uint64_t seed = 0;
  int fixed_label = -1;  // -1 draws a class uniformly per sample
  int threads = 1;

  void validate() const;
  bool operator==(const SamplerConfig&) const = default;
};

// x + dt * v
Vec euler_step(const Vec& x, const Vec& v, double dt);

struct SampleRun {
  SampleSet samples;
  FlopsLedger ledger;
};

// Alg.-3 style sequential per-segment Euler sampling: the alignment network
// runs at every solver step. Guidance (w != 1) adds a null-label pass whose
// counts appear under "...@null" ledger keys.
SampleRun sample_full(const ModelBundle& bundle, const SamplerConfig& cfg);

// Alg.-4 style accelerated sampling: f_phi runs once per segment (at the
// segment start) and the residual network fills in the remaining K-1 steps.
SampleRun sample_frn(const ModelBundle& bundle, const SamplerConfig& cfg);

// Closed-form MAC prediction for the exact call structure of the samplers;
// instrumented runs must match it with integer equality.
FlopsLedger analytic_flops(const ModelBundle& bundle, const SamplerConfig& cfg);

}  // namespace bfm
