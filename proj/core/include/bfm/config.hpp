#pragma once

#include <string>

#include "bfm/data.hpp"
#include "bfm/inference.hpp"
#include "bfm/training.hpp"

namespace bfm {

struct EvalConfig {
  int n_projections = 128;
  double bandwidth = 0.0;  // 0 = median heuristic
  std::uint64_t seed = 0;
  bool operator==(const EvalConfig&) const = default;
};

struct AnalysisConfig {
  std::vector<double> timesteps = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::uint64_t seed = 0;
  bool operator==(const AnalysisConfig&) const = default;
};

// Everything one experiment needs, parsed from a flat "section.key = value"
// text file with '#' comments; command-line --set overrides reuse the same
// key space.
struct RunConfig {
  std::string run_id = "run";
  std::string out_dir = ".";
  int threads = 1;
  DatasetSpec data;
  TrainConfig train;
  SamplerConfig sample;
  EvalConfig eval;
  AnalysisConfig analysis;

  void validate() const;
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Applies one "section.key=value" assignment; unknown keys and malformed
// values throw with the key path in the message.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Full echo of every key; parse_config_text(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

bool config_equal(const RunConfig& a, const RunConfig& b);

}  // namespace bfm
