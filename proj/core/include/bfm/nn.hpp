#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bfm/common.hpp"

namespace bfm {

enum class Activation { SiLU };

// Dense network description. The trunk is n_layers linear maps with SiLU
// between them (none after the last). Conditioning, when cond_dim > 0, is a
// vector added to the first pre-activation, so cond_dim must equal the first
// layer's output width. The optional label table and feature projection are
// learned inputs to that conditioning sum and live in the same flat parameter
// buffer as the trunk.
struct MlpSpec {
  int in_dim = 0;
  int hidden_dim = 0;
  int out_dim = 0;
  int n_layers = 1;
  int cond_dim = 0;     // 0 = unconditioned
  int n_labels = 0;     // rows = n_labels + 1 (last row is the null label)
  int feature_dim = 0;  // feature projection cond_dim x feature_dim
  Activation activation = Activation::SiLU;

  int layer_in(int l) const;   // l in 1..n_layers
  int layer_out(int l) const;
  int first_width() const { return n_layers == 1 ? out_dim : hidden_dim; }
  void validate() const;
};

struct ParamLayout {
  struct Entry {
    std::string name;
    int rows = 0, cols = 0;
    std::size_t offset = 0;
    std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
  };
  std::vector<Entry> entries;
  std::size_t total = 0;

  const Entry& find(const std::string& name) const;
};

ParamLayout param_layout(const MlpSpec& spec);

struct ParamSet {
  MlpSpec spec;
  std::uint64_t seed = 0;
  Vec flat;  // layout per param_layout(spec); values kept on the f32 grid

  std::size_t size() const { return flat.size(); }
};

// Deterministic init: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero,
// label rows and feature projection fan-in scaled likewise. Draws are rounded
// to f32 so checkpoints reproduce parameters bit-exactly.
ParamSet init_params(const MlpSpec& spec, std::uint64_t seed);

struct MlpCache {
  Vec x, cond;
  std::vector<Vec> pre;   // z_l per layer
  std::vector<Vec> post;  // act(z_l) per hidden layer
  std::uint64_t macs = 0;
};

// Trunk evaluation; cond must be empty when cond_dim == 0, else of size
// cond_dim. The cache holds everything mlp_backward needs.
Vec mlp_forward(const ParamSet& params, const Vec& x, const Vec& cond, MlpCache& cache);

struct MlpGrads {
  Vec flat;      // full layout; only trunk entries are touched by mlp_backward
  Vec grad_x;
  Vec grad_cond; // empty when cond_dim == 0
};

// Exact reverse-mode gradients of sum(grad_y . y) w.r.t. trunk parameters,
// input, and the conditioning vector. `grads.flat` is accumulated into, which
// lets one buffer collect a whole batch.
void mlp_backward(const ParamSet& params, const MlpCache& cache, const Vec& grad_y,
                  MlpGrads& grads);

MlpGrads make_grads(const ParamSet& params);

// --- conditioned wrapper: label table + timestep embedding + feature input ---

struct CondCache {
  MlpCache trunk;
  int label = -1;
  Vec feat;
};

// Assembles cond = timestep_embedding(t) + label_row(label) [+ P*feat] and runs
// the trunk. label indexes the table (n_labels is the null row); feat must
// have size feature_dim (or be empty when feature_dim == 0).
Vec cond_forward(const ParamSet& params, const Vec& x, double t, int label,
                 const Vec& feat, CondCache& cache);

// Backward through cond_forward; routes conditioning gradients into the label
// row and feature projection and returns d/d feat when requested.
void cond_backward(const ParamSet& params, const CondCache& cache, const Vec& grad_y,
                   MlpGrads& grads, Vec* grad_feat = nullptr);

// MACs of one trunk evaluation (dense layers only; adds and activations are
// free in this accounting).
std::uint64_t trunk_macs(const MlpSpec& spec);
// MACs of one cond_forward evaluation (trunk plus the feature projection).
std::uint64_t eval_macs(const MlpSpec& spec);

// --- optimizer ---

struct OptState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 0;
  Vec m, v;
};

OptState make_opt_state(const ParamSet& params, double lr, double weight_decay = 0.0);

// One AdamW step with decoupled weight decay. Parameters and moments are
// rounded to the f32 grid after the update (the persistence precision).
// Non-finite gradients raise divergence_error.
void adamw_step(ParamSet& params, const Vec& grads, OptState& state);

// Sinusoidal embedding of t in [0,1]: [sin(w_i t) | cos(w_i t)] with dim/2
// frequencies geometrically spaced in [1, 1000]. dim must be even.
Vec timestep_embedding(double t, int dim);

// CRC32 of the f32 image of the parameters; used for freeze contracts.
std::uint32_t param_checksum(const ParamSet& params);

}  // namespace bfm
