#pragma once

#include <cstdint>
#include <vector>

#include "bfm/models.hpp"
#include "bfm/rng.hpp"
#include "bfm/sample_set.hpp"

namespace bfm {

struct TrainConfig {
  int batch_size = 864;
  int iterations = 2000;
  double lambda_align = 0.5;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  int M = 6;
  double label_drop_prob = 0.1;
  bool use_semfeat = true;
  bool frn_residual = true;  // stage-2 parameterization; false = direct ablation
  NetDims dims;
  std::uint64_t oracle_seed = 7777;
  int threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Per-iteration losses. Stage-1 rows carry (bfm, align, total); stage-2 rows
// carry frn. Fields that do not apply hold NaN and are left blank in CSV.
struct LossRow {
  std::int64_t iteration = 0;
  double loss_bfm = 0, loss_align = 0, loss_total = 0, loss_frn = 0;
  double wall_ms = 0;
};
using LossReport = std::vector<LossRow>;

// Disjoint groups of size B/M covering 0..B-1, assigned by one shuffle.
// Requires M | B.
std::vector<std::vector<int>> partition_batch(int B, int M, Rng& rng);

// -cos(h, h_star); throws on a zero-norm argument.
double align_loss(const Vec& h, const Vec& h_star);
// mean squared error over vector entries
double bfm_loss(const Vec& v_hat, const Vec& v_target);
double frn_loss(const Vec& f_hat, const Vec& f_t);

// Per-sample forward/backward of the stage-1 objective, the exact computation
// the trainer runs per batch item. Gradients scaled by sample_weight
// (1/B inside the loop) accumulate into the provided buffers; align/proj
// buffers are ignored for bundles without SemFeat.
struct Stage1Scratch {
  CondCache cache_v, cache_f;
  MlpCache cache_p;
  Vec x_lo, x_hi, g_feat;
};

struct SampleLosses {
  double bfm = 0;
  double align = 0;
};

SampleLosses stage1_sample_grads(const ModelBundle& bundle, double lambda,
                                 double sample_weight, const Vec& x1, const Vec& eps,
                                 int m, double t, int label, MlpGrads& block_grads,
                                 MlpGrads* align_grads, MlpGrads* proj_grads,
                                 Stage1Scratch& scratch);

// Per-sample stage-2 objective: regress f_hat onto the frozen f_phi's f_t.
// Only FRN gradients are produced. Returns the per-sample loss.
struct Stage2Scratch {
  CondCache cache_r, cache_tmp;
  Vec x_lo, x_hi;
};

double stage2_sample_grads(const ModelBundle& bundle, bool residual,
                           double sample_weight, const Vec& x1, const Vec& eps, int m,
                           double t, int label, MlpGrads& frn_grads,
                           Stage2Scratch& scratch);

// Stage 1: joint training of velocity blocks, alignment network and
// projection head with balanced batch partitioning. Owns the bundle, the
// per-network AdamW states and the loop RNG so a checkpoint can freeze and
// resume the exact state.
class Stage1Trainer {
 public:
  Stage1Trainer(const TrainConfig& config, const SampleSet& data);

  LossRow step();  // one iteration

  const TrainConfig& config() const { return config_; }
  ModelBundle& bundle() { return bundle_; }
  const ModelBundle& bundle() const { return bundle_; }
  std::int64_t iteration() const { return iteration_; }

  // checkpoint plumbing: optimizer states in trainable-net order
  // (v1..vM, f_phi, h_psi)
  std::vector<OptState>& opt_states() { return opt_; }
  Rng& rng() { return rng_; }
  void restore(ModelBundle bundle, std::vector<OptState> opt, const std::string& rng_state,
               std::int64_t iteration);

 private:
  TrainConfig config_;
  const SampleSet* data_;
  ModelBundle bundle_;
  std::vector<OptState> opt_;
  Rng rng_;
  std::int64_t iteration_ = 0;
};

// Stage 2: trains the feature residual network against the frozen stage-1
// bundle. Only bundle.frn is written.
class Stage2Trainer {
 public:
  Stage2Trainer(const TrainConfig& config, const SampleSet& data, ModelBundle& bundle);

  LossRow step();

  ModelBundle& bundle() { return *bundle_; }
  std::int64_t iteration() const { return iteration_; }
  OptState& opt_state() { return opt_; }
  Rng& rng() { return rng_; }
  void restore(OptState opt, const std::string& rng_state, std::int64_t iteration);

 private:
  TrainConfig config_;
  const SampleSet* data_;
  ModelBundle* bundle_;
  OptState opt_;
  Rng rng_;
  std::int64_t iteration_ = 0;
};

ModelBundle train_bfm(const TrainConfig& config, const SampleSet& data,
                      LossReport* report = nullptr);

// M = 1, no SemFeat: the standard flow matching baseline, sharing the
// Stage1Trainer code path so seeded runs agree bit-exactly with
// train_bfm(M=1, lambda=0, semfeat off).
ModelBundle train_monolithic_fm(TrainConfig config, const SampleSet& data,
                                LossReport* report = nullptr);

// Trains (and if absent, initializes) bundle.frn; theta/phi/psi are frozen.
void train_frn(const TrainConfig& config, const SampleSet& data, ModelBundle& bundle,
               LossReport* report = nullptr);

}  // namespace bfm
