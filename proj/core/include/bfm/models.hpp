#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bfm/flops.hpp"
#include "bfm/nn.hpp"
#include "bfm/schedule.hpp"

namespace bfm {

// Widths and depths for every network role. feature_dim is the width of the
// semantic feature f_t (defaults to d_x), oracle_dim the width of the frozen
// encoder embedding h*.
struct NetDims {
  int d_x = 2;
  int n_classes = 8;
  int feature_dim = 2;
  int oracle_dim = 16;
  int vel_hidden = 64;
  int vel_layers = 4;
  int align_hidden = 64;
  int align_layers = 6;
  int proj_hidden = 64;   // projection head is a 3-layer MLP
  int frn_hidden = 64;
  int frn_layers = 2;
  int oracle_hidden = 32; // frozen encoder is a 3-layer MLP

  MlpSpec velocity_spec(bool with_features) const;
  MlpSpec align_spec() const;
  MlpSpec proj_spec() const;
  MlpSpec frn_spec() const;
  MlpSpec oracle_spec() const;
  bool operator==(const NetDims&) const = default;
};

struct GuidanceConfig {
  double w = 1.0;       // 1 = guidance off (single conditional pass)
  int null_label = -1;  // defaults to n_classes when built from a bundle
  bool operator==(const GuidanceConfig&) const = default;
};

// All networks of one experiment: M per-segment velocity blocks, the shared
// feature alignment network, its projection head, the optional feature
// residual network, and the frozen oracle encoder the alignment trains
// against.
struct ModelBundle {
  SegmentSchedule schedule;
  NetDims dims;
  bool use_semfeat = true;
  std::vector<ParamSet> velocity_blocks;  // size M
  ParamSet align_net;                     // empty when !use_semfeat
  ParamSet proj_head;                     // empty when !use_semfeat
  ParamSet frn;                           // empty until stage-2 training
  ParamSet oracle;
  std::uint64_t oracle_seed = 0;

  int M() const { return schedule.M; }
  int null_label() const { return dims.n_classes; }
  bool has_frn() const { return !frn.flat.empty(); }
};

// Deterministic construction; per-role init seeds are derived from `seed`,
// the oracle from its own seed so the alignment target is stable across runs.
ModelBundle make_bundle(int M, const NetDims& dims, std::uint64_t seed,
                        bool use_semfeat, std::uint64_t oracle_seed,
                        bool with_frn = false);

ParamSet init_frn(const NetDims& dims, std::uint64_t seed);

// h* = E(x1), L2-normalized output of the frozen encoder.
Vec oracle_encode(const ModelBundle& bundle, const Vec& x1,
                  FlopsLedger* ledger = nullptr);

// f_t = f_phi(x_t, c) with the timestep embedding in the conditioning sum.
Vec align_forward(const ModelBundle& bundle, const Vec& x_t, double t, int label,
                  FlopsLedger* ledger = nullptr, CondCache* cache = nullptr);

// h = h_psi(f_t)
Vec project_feature(const ModelBundle& bundle, const Vec& f_t,
                    FlopsLedger* ledger = nullptr, MlpCache* cache = nullptr);

// v_hat = v_theta^(m)(x_t, c, f_t); only block m's parameters are read, which
// the ledger records as one "v{m}" evaluation. m must match segment_index(t).
Vec velocity_eval(const ModelBundle& bundle, int m, const Vec& x_t, double t,
                  int label, const Vec& f_t, FlopsLedger* ledger = nullptr,
                  CondCache* cache = nullptr);

// f_hat = f_start + b * f_eta(x_t, c)
Vec frn_approximate(const ModelBundle& bundle, const Vec& f_start, const Vec& x_t,
                    double t, int label, const SegmentCoords& coords,
                    FlopsLedger* ledger = nullptr, CondCache* cache = nullptr);

// v_uncond + w * (v_cond - v_uncond)
Vec cfg_combine(const Vec& v_cond, const Vec& v_uncond, double w);

std::uint32_t oracle_checksum(const ModelBundle& bundle);
// checksum over theta, phi, psi (the stage-1 trainables)
std::uint32_t stage1_checksum(const ModelBundle& bundle);

}  // namespace bfm
