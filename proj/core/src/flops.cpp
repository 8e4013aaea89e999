#include "bfm/flops.hpp"

#include <json.hpp>

namespace bfm {

std::string FlopsLedger::to_json_string() const {
  nlohmann::json j;
  j["n_samples"] = n_samples;
  j["solver_steps"] = solver_steps;
  j["total_macs"] = total_macs();
  j["avg_gflops_per_step"] = avg_gflops_per_step();
  nlohmann::json nets = nlohmann::json::object();
  for (const auto& [name, c] : by_net) {
    nets[name] = {{"evals", c.evals}, {"macs", c.macs}};
  }
  j["by_net"] = nets;
  j["per_step_macs"] = per_step_macs;
  return j.dump(2);
}

}  // namespace bfm
