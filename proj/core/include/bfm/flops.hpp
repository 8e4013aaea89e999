#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bfm {

// Exact multiply-accumulate accounting. One dense layer of shape rows x cols
// costs rows*cols MACs per evaluation; adds, activations and embeddings are
// free. GFLOPs figures use the MACs-as-FLOPs convention throughout.
struct NetCount {
  std::uint64_t evals = 0;
  std::uint64_t macs = 0;
  bool operator==(const NetCount&) const = default;
};

struct FlopsLedger {
  std::map<std::string, NetCount> by_net;
  std::uint64_t solver_steps = 0;            // M*K per sample
  std::uint64_t n_samples = 0;
  std::vector<std::uint64_t> per_step_macs;  // one sample, both guidance passes

  void record(const std::string& name, std::uint64_t macs) {
    auto& c = by_net[name];
    c.evals += 1;
    c.macs += macs;
  }

  std::uint64_t total_macs() const {
    std::uint64_t t = 0;
    for (const auto& [_, c] : by_net) t += c.macs;
    return t;
  }

  std::uint64_t evals(const std::string& name) const {
    auto it = by_net.find(name);
    return it == by_net.end() ? 0 : it->second.evals;
  }

  // mean MACs per solver step per sample, as GFLOPs
  double avg_gflops_per_step() const {
    if (solver_steps == 0 || n_samples == 0) return 0.0;
    return static_cast<double>(total_macs()) /
           (static_cast<double>(solver_steps) * static_cast<double>(n_samples)) / 1e9;
  }

  // folds `other` in with every net name suffixed (used for the null-label
  // guidance pass)
  void merge_suffixed(const FlopsLedger& other, const std::string& suffix) {
    for (const auto& [name, c] : other.by_net) {
      auto& dst = by_net[name + suffix];
      dst.evals += c.evals;
      dst.macs += c.macs;
    }
  }

  void merge(const FlopsLedger& other) {
    for (const auto& [name, c] : other.by_net) {
      auto& dst = by_net[name];
      dst.evals += c.evals;
      dst.macs += c.macs;
    }
  }

  bool counts_equal(const FlopsLedger& other) const {
    return by_net == other.by_net && per_step_macs == other.per_step_macs;
  }

  std::string to_json_string() const;
};

}  // namespace bfm
