#include "bfm/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bfm/rng.hpp"

namespace bfm {

MlpSpec NetDims::velocity_spec(bool with_features) const {
  MlpSpec s;
  s.in_dim = d_x;
  s.hidden_dim = vel_hidden;
  s.out_dim = d_x;
  s.n_layers = vel_layers;
  s.cond_dim = s.first_width();
  s.n_labels = n_classes;
  s.feature_dim = with_features ? feature_dim : 0;
  return s;
}

MlpSpec NetDims::align_spec() const {
  MlpSpec s;
  s.in_dim = d_x;
  s.hidden_dim = align_hidden;
  s.out_dim = feature_dim;
  s.n_layers = align_layers;
  s.cond_dim = s.first_width();
  s.n_labels = n_classes;
  return s;
}

MlpSpec NetDims::proj_spec() const {
  MlpSpec s;
  s.in_dim = feature_dim;
  s.hidden_dim = proj_hidden;
  s.out_dim = oracle_dim;
  s.n_layers = 3;
  return s;
}

MlpSpec NetDims::frn_spec() const {
  MlpSpec s;
  s.in_dim = d_x;
  s.hidden_dim = frn_hidden;
  s.out_dim = feature_dim;
  s.n_layers = frn_layers;
  s.cond_dim = s.first_width();
  s.n_labels = n_classes;
  return s;
}

MlpSpec NetDims::oracle_spec() const {
  MlpSpec s;
  s.in_dim = d_x;
  s.hidden_dim = oracle_hidden;
  s.out_dim = oracle_dim;
  s.n_layers = 3;
  return s;
}

namespace {

// The oracle draws its own parameters: larger weights push the SiLU units
// into their nonlinear range (a near-linear encoder maps distinct inputs to
// nearly collinear embeddings), and nonzero biases keep the zero input away
// from the zero embedding where L2 normalization is undefined.
ParamSet init_oracle(const MlpSpec& spec, std::uint64_t seed) {
  constexpr double kGain = 3.0;
  ParamSet p = init_params(spec, seed);
  ParamLayout lay = param_layout(spec);
  Rng rng(splitmix64(seed ^ 0x6f72636cULL));
  for (const auto& e : lay.entries) {
    if (e.name[0] == 'W') {
      const double scale = kGain / std::sqrt(static_cast<double>(e.cols));
      for (std::size_t i = 0; i < e.count(); ++i) {
        p.flat[e.offset + i] = f32_round(rng.uniform(-scale, scale));
      }
    } else {
      for (std::size_t i = 0; i < e.count(); ++i) {
        p.flat[e.offset + i] = f32_round(rng.uniform(-0.5, 0.5));
      }
    }
  }
  return p;
}

}  // namespace

ModelBundle make_bundle(int M, const NetDims& dims, std::uint64_t seed,
                        bool use_semfeat, std::uint64_t oracle_seed, bool with_frn) {
  ModelBundle b;
  b.schedule = make_uniform_schedule(M);
  b.dims = dims;
  b.use_semfeat = use_semfeat;
  b.oracle_seed = oracle_seed;
  b.velocity_blocks.reserve(M);
  for (int m = 1; m <= M; ++m) {
    b.velocity_blocks.push_back(
        init_params(dims.velocity_spec(use_semfeat), derive_seed(seed, 100 + m)));
  }
  if (use_semfeat) {
    b.align_net = init_params(dims.align_spec(), derive_seed(seed, 1));
    b.proj_head = init_params(dims.proj_spec(), derive_seed(seed, 2));
  }
  if (with_frn) b.frn = init_frn(dims, derive_seed(seed, 3));
  b.oracle = init_oracle(dims.oracle_spec(), oracle_seed);
  return b;
}

ParamSet init_frn(const NetDims& dims, std::uint64_t seed) {
  return init_params(dims.frn_spec(), seed);
}

Vec oracle_encode(const ModelBundle& bundle, const Vec& x1, FlopsLedger* ledger) {
  if (static_cast<int>(x1.size()) != bundle.dims.d_x) {
    throw std::invalid_argument("oracle_encode: input dim mismatch");
  }
  MlpCache cache;
  Vec h = mlp_forward(bundle.oracle, x1, {}, cache);
  if (ledger) ledger->record("oracle", cache.macs);
  double norm = 0.0;
  for (double v : h) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) {
    throw std::invalid_argument("oracle_encode: zero-norm embedding");
  }
  for (double& v : h) v /= norm;
  return h;
}

Vec align_forward(const ModelBundle& bundle, const Vec& x_t, double t, int label,
                  FlopsLedger* ledger, CondCache* cache) {
  if (!bundle.use_semfeat) {
    throw unsupported_error("align_forward: bundle has no alignment network");
  }
  CondCache local;
  CondCache& c = cache ? *cache : local;
  Vec f = cond_forward(bundle.align_net, x_t, t, label, {}, c);
  if (ledger) ledger->record("f_phi", c.trunk.macs);
  return f;
}

Vec project_feature(const ModelBundle& bundle, const Vec& f_t, FlopsLedger* ledger,
                    MlpCache* cache) {
  if (!bundle.use_semfeat) {
    throw unsupported_error("project_feature: bundle has no projection head");
  }
  if (!all_finite(f_t)) throw std::invalid_argument("project_feature: non-finite feature");
  MlpCache local;
  MlpCache& c = cache ? *cache : local;
  Vec h = mlp_forward(bundle.proj_head, f_t, {}, c);
  if (ledger) ledger->record("h_psi", c.macs);
  return h;
}

Vec velocity_eval(const ModelBundle& bundle, int m, const Vec& x_t, double t,
                  int label, const Vec& f_t, FlopsLedger* ledger, CondCache* cache) {
  if (m < 1 || m > bundle.M()) {
    throw std::invalid_argument("velocity_eval: segment index " + std::to_string(m) +
                                " outside 1.." + std::to_string(bundle.M()));
  }
  SegmentCoords c = segment_index(t, bundle.schedule);
  if (c.m != m) {
    throw std::invalid_argument("velocity_eval: t = " + std::to_string(t) +
                                " lies in segment " + std::to_string(c.m) +
                                ", not " + std::to_string(m));
  }
  CondCache local;
  CondCache& cc = cache ? *cache : local;
  Vec v = cond_forward(bundle.velocity_blocks[m - 1], x_t, t, label, f_t, cc);
  if (ledger) ledger->record("v" + std::to_string(m), cc.trunk.macs);
  return v;
}

Vec frn_approximate(const ModelBundle& bundle, const Vec& f_start, const Vec& x_t,
                    double t, int label, const SegmentCoords& coords,
                    FlopsLedger* ledger, CondCache* cache) {
  if (!bundle.has_frn()) {
    throw unsupported_error("frn_approximate: bundle has no feature residual network");
  }
  if (static_cast<int>(f_start.size()) != bundle.dims.feature_dim) {
    throw std::invalid_argument("frn_approximate: f_start dim mismatch");
  }
  CondCache local;
  CondCache& cc = cache ? *cache : local;
  Vec r = cond_forward(bundle.frn, x_t, t, label, {}, cc);
  if (ledger) ledger->record("f_eta", cc.trunk.macs);
  Vec f = f_start;
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += coords.b * r[i];
  return f;
}

Vec cfg_combine(const Vec& v_cond, const Vec& v_uncond, double w) {
  check_same_dim(v_cond, v_uncond, "cfg_combine");
  Vec out(v_cond.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = v_uncond[i] + w * (v_cond[i] - v_uncond[i]);
  }
  return out;
}

std::uint32_t oracle_checksum(const ModelBundle& bundle) {
  return param_checksum(bundle.oracle);
}

std::uint32_t stage1_checksum(const ModelBundle& bundle) {
  std::uint32_t h = 0;
  for (const auto& blk : bundle.velocity_blocks) {
    h = h * 1000003u + param_checksum(blk);
  }
  if (bundle.use_semfeat) {
    h = h * 1000003u + param_checksum(bundle.align_net);
    h = h * 1000003u + param_checksum(bundle.proj_head);
  }
  return h;
}

}  // namespace bfm
