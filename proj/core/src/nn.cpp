#include "bfm/nn.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "bfm/rng.hpp"

namespace bfm {

namespace {

double silu(double z) { return z / (1.0 + std::exp(-z)); }

double silu_grad(double z) {
  double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 + z * (1.0 - s));
}

// y += W x, W row-major (rows x cols)
void matvec_acc(const double* W, const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* w = W + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] += acc;
  }
}

// gW += g ⊗ x ; gx += W^T g
void matvec_backward(const double* W, const double* x, const double* g,
                     double* gW, double* gx, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double gr = g[r];
    const double* w = W + static_cast<std::size_t>(r) * cols;
    double* gWr = gW + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      gWr[c] += gr * x[c];
      gx[c] += w[c] * gr;
    }
  }
}

std::size_t trunk_param_count(const MlpSpec& s) {
  std::size_t n = 0;
  for (int l = 1; l <= s.n_layers; ++l) {
    n += static_cast<std::size_t>(s.layer_out(l)) * s.layer_in(l) + s.layer_out(l);
  }
  return n;
}

std::size_t label_table_offset(const MlpSpec& s) { return trunk_param_count(s); }

std::size_t feat_proj_offset(const MlpSpec& s) {
  std::size_t off = trunk_param_count(s);
  if (s.n_labels > 0) off += static_cast<std::size_t>(s.n_labels + 1) * s.cond_dim;
  return off;
}

}  // namespace

int MlpSpec::layer_in(int l) const { return l == 1 ? in_dim : hidden_dim; }

int MlpSpec::layer_out(int l) const { return l == n_layers ? out_dim : hidden_dim; }

void MlpSpec::validate() const {
  if (in_dim < 1 || out_dim < 1 || n_layers < 1) {
    throw std::invalid_argument("MlpSpec: in_dim, out_dim, n_layers must be >= 1");
  }
  if (n_layers > 1 && hidden_dim < 1) {
    throw std::invalid_argument("MlpSpec: hidden_dim must be >= 1 when n_layers > 1");
  }
  if (cond_dim < 0 || n_labels < 0 || feature_dim < 0) {
    throw std::invalid_argument("MlpSpec: negative conditioning dims");
  }
  if (cond_dim > 0 && cond_dim != first_width()) {
    throw std::invalid_argument("MlpSpec: cond_dim must equal the first layer width");
  }
  if (cond_dim == 0 && (n_labels > 0 || feature_dim > 0)) {
    throw std::invalid_argument("MlpSpec: label/feature conditioning requires cond_dim > 0");
  }
  if (cond_dim > 0 && cond_dim % 2 != 0) {
    throw std::invalid_argument("MlpSpec: cond_dim must be even (timestep embedding)");
  }
}

const ParamLayout::Entry& ParamLayout::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw std::invalid_argument("ParamLayout: no entry named " + name);
}

ParamLayout param_layout(const MlpSpec& spec) {
  spec.validate();
  ParamLayout lay;
  std::size_t off = 0;
  auto push = [&](const std::string& name, int rows, int cols) {
    lay.entries.push_back({name, rows, cols, off});
    off += static_cast<std::size_t>(rows) * cols;
  };
  for (int l = 1; l <= spec.n_layers; ++l) {
    push("W" + std::to_string(l), spec.layer_out(l), spec.layer_in(l));
    push("b" + std::to_string(l), spec.layer_out(l), 1);
  }
  if (spec.n_labels > 0) push("label_table", spec.n_labels + 1, spec.cond_dim);
  if (spec.feature_dim > 0) push("feat_proj", spec.cond_dim, spec.feature_dim);
  lay.total = off;
  return lay;
}

ParamSet init_params(const MlpSpec& spec, std::uint64_t seed) {
  ParamLayout lay = param_layout(spec);
  ParamSet p;
  p.spec = spec;
  p.seed = seed;
  p.flat.assign(lay.total, 0.0);
  Rng rng(seed);
  auto fill_uniform = [&](const ParamLayout::Entry& e, double scale) {
    for (std::size_t i = 0; i < e.count(); ++i) {
      p.flat[e.offset + i] = f32_round(rng.uniform(-scale, scale));
    }
  };
  for (const auto& e : lay.entries) {
    if (e.name[0] == 'W') {
      fill_uniform(e, 1.0 / std::sqrt(static_cast<double>(e.cols)));
    } else if (e.name == "label_table") {
      fill_uniform(e, 1.0 / std::sqrt(static_cast<double>(spec.cond_dim)));
    } else if (e.name == "feat_proj") {
      fill_uniform(e, 1.0 / std::sqrt(static_cast<double>(spec.feature_dim)));
    }
    // biases stay zero
  }
  return p;
}

Vec mlp_forward(const ParamSet& params, const Vec& x, const Vec& cond, MlpCache& cache) {
  const MlpSpec& s = params.spec;
  if (static_cast<int>(x.size()) != s.in_dim) {
    throw std::invalid_argument("mlp_forward: input dim mismatch");
  }
  if (static_cast<int>(cond.size()) != s.cond_dim) {
    throw std::invalid_argument("mlp_forward: cond dim mismatch");
  }
  if (!all_finite(x) || !all_finite(cond)) {
    throw std::invalid_argument("mlp_forward: non-finite input");
  }

  cache.x = x;
  cache.cond = cond;
  cache.pre.assign(s.n_layers, {});
  cache.post.assign(s.n_layers, {});
  cache.macs = 0;

  const Vec* cur = &x;
  std::size_t off = 0;
  for (int l = 1; l <= s.n_layers; ++l) {
    const int rows = s.layer_out(l);
    const int cols = s.layer_in(l);
    const double* W = params.flat.data() + off;
    const double* b = W + static_cast<std::size_t>(rows) * cols;
    off += static_cast<std::size_t>(rows) * cols + rows;
    Vec z(b, b + rows);
    matvec_acc(W, cur->data(), z.data(), rows, cols);
    cache.macs += static_cast<std::uint64_t>(rows) * cols;
    if (l == 1 && s.cond_dim > 0) {
      for (int i = 0; i < s.cond_dim; ++i) z[i] += cond[i];
    }
    cache.pre[l - 1] = std::move(z);
    if (l < s.n_layers) {
      Vec h(cache.pre[l - 1].size());
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = silu(cache.pre[l - 1][i]);
      cache.post[l - 1] = std::move(h);
      cur = &cache.post[l - 1];
    }
  }
  return cache.pre[s.n_layers - 1];
}

MlpGrads make_grads(const ParamSet& params) {
  MlpGrads g;
  g.flat.assign(params.flat.size(), 0.0);
  return g;
}

void mlp_backward(const ParamSet& params, const MlpCache& cache, const Vec& grad_y,
                  MlpGrads& grads) {
  const MlpSpec& s = params.spec;
  if (static_cast<int>(grad_y.size()) != s.out_dim) {
    throw std::invalid_argument("mlp_backward: grad_y dim mismatch");
  }
  if (cache.pre.size() != static_cast<std::size_t>(s.n_layers) ||
      static_cast<int>(cache.x.size()) != s.in_dim) {
    throw std::invalid_argument("mlp_backward: cache does not match spec");
  }
  if (grads.flat.size() != params.flat.size()) grads.flat.assign(params.flat.size(), 0.0);

  // offsets of (W, b) per layer
  std::vector<std::size_t> w_off(s.n_layers);
  std::size_t off = 0;
  for (int l = 1; l <= s.n_layers; ++l) {
    w_off[l - 1] = off;
    off += static_cast<std::size_t>(s.layer_out(l)) * s.layer_in(l) + s.layer_out(l);
  }

  Vec gz = grad_y;  // gradient at the current pre-activation
  for (int l = s.n_layers; l >= 1; --l) {
    const int rows = s.layer_out(l);
    const int cols = s.layer_in(l);
    const std::size_t wo = w_off[l - 1];
    const std::size_t bo = wo + static_cast<std::size_t>(rows) * cols;
    const Vec& input = (l == 1) ? cache.x : cache.post[l - 2];
    for (int i = 0; i < rows; ++i) grads.flat[bo + i] += gz[i];
    if (l == 1 && s.cond_dim > 0) {
      grads.grad_cond = gz;  // cond adds straight into the first pre-activation
    }
    Vec gin(input.size(), 0.0);
    matvec_backward(params.flat.data() + wo, input.data(), gz.data(),
                    grads.flat.data() + wo, gin.data(), rows, cols);
    if (l > 1) {
      const Vec& z_prev = cache.pre[l - 2];
      for (std::size_t i = 0; i < gin.size(); ++i) gin[i] *= silu_grad(z_prev[i]);
    }
    gz = std::move(gin);
  }
  grads.grad_x = std::move(gz);
  if (s.cond_dim == 0) grads.grad_cond.clear();
}

Vec cond_forward(const ParamSet& params, const Vec& x, double t, int label,
                 const Vec& feat, CondCache& cache) {
  const MlpSpec& s = params.spec;
  Vec cond;
  if (s.cond_dim > 0) {
    cond = timestep_embedding(t, s.cond_dim);
    if (s.n_labels > 0) {
      if (label < 0 || label > s.n_labels) {
        throw std::invalid_argument("cond_forward: label out of range");
      }
      const double* row = params.flat.data() + label_table_offset(s) +
                          static_cast<std::size_t>(label) * s.cond_dim;
      for (int i = 0; i < s.cond_dim; ++i) cond[i] += row[i];
    }
    if (s.feature_dim > 0) {
      if (static_cast<int>(feat.size()) != s.feature_dim) {
        throw std::invalid_argument("cond_forward: feature dim mismatch");
      }
      matvec_acc(params.flat.data() + feat_proj_offset(s), feat.data(), cond.data(),
                 s.cond_dim, s.feature_dim);
    }
  }
  cache.label = label;
  cache.feat = feat;
  Vec y = mlp_forward(params, x, cond, cache.trunk);
  if (s.feature_dim > 0) {
    cache.trunk.macs += static_cast<std::uint64_t>(s.cond_dim) * s.feature_dim;
  }
  return y;
}

void cond_backward(const ParamSet& params, const CondCache& cache, const Vec& grad_y,
                   MlpGrads& grads, Vec* grad_feat) {
  const MlpSpec& s = params.spec;
  mlp_backward(params, cache.trunk, grad_y, grads);
  if (s.cond_dim == 0) {
    if (grad_feat) grad_feat->clear();
    return;
  }
  const Vec& gcond = grads.grad_cond;
  if (s.n_labels > 0) {
    double* row = grads.flat.data() + label_table_offset(s) +
                  static_cast<std::size_t>(cache.label) * s.cond_dim;
    for (int i = 0; i < s.cond_dim; ++i) row[i] += gcond[i];
  }
  if (s.feature_dim > 0) {
    if (grad_feat) grad_feat->assign(s.feature_dim, 0.0);
    Vec sink;
    if (!grad_feat) sink.assign(s.feature_dim, 0.0);
    matvec_backward(params.flat.data() + feat_proj_offset(s), cache.feat.data(),
                    gcond.data(), grads.flat.data() + feat_proj_offset(s),
                    grad_feat ? grad_feat->data() : sink.data(), s.cond_dim,
                    s.feature_dim);
  } else if (grad_feat) {
    grad_feat->clear();
  }
}

std::uint64_t trunk_macs(const MlpSpec& spec) {
  std::uint64_t total = 0;
  for (int l = 1; l <= spec.n_layers; ++l) {
    total += static_cast<std::uint64_t>(spec.layer_out(l)) * spec.layer_in(l);
  }
  return total;
}

std::uint64_t eval_macs(const MlpSpec& spec) {
  std::uint64_t total = trunk_macs(spec);
  if (spec.feature_dim > 0) {
    total += static_cast<std::uint64_t>(spec.cond_dim) * spec.feature_dim;
  }
  return total;
}

OptState make_opt_state(const ParamSet& params, double lr, double weight_decay) {
  OptState st;
  st.lr = lr;
  st.weight_decay = weight_decay;
  st.m.assign(params.flat.size(), 0.0);
  st.v.assign(params.flat.size(), 0.0);
  return st;
}

void adamw_step(ParamSet& params, const Vec& grads, OptState& state) {
  if (grads.size() != params.flat.size() || state.m.size() != params.flat.size()) {
    throw std::invalid_argument("adamw_step: shape mismatch");
  }
  if (!all_finite(grads)) {
    throw divergence_error("adamw_step: non-finite gradient");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.flat.size(); ++i) {
    const double g = grads[i];
    double m = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    double v = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    double p = params.flat[i];
    p -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) + state.weight_decay * p);
    params.flat[i] = f32_round(p);
    state.m[i] = f32_round(m);
    state.v[i] = f32_round(v);
  }
}

Vec timestep_embedding(double t, int dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw std::invalid_argument("timestep_embedding: dim must be positive and even");
  }
  const int half = dim / 2;
  Vec out(dim);
  const double max_freq = 1000.0;
  for (int i = 0; i < half; ++i) {
    double w = (half == 1) ? 1.0
                           : std::pow(max_freq, static_cast<double>(i) / (half - 1));
    out[i] = std::sin(w * t);
    out[half + i] = std::cos(w * t);
  }
  return out;
}

std::uint32_t param_checksum(const ParamSet& params) {
  std::vector<float> f(params.flat.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(params.flat[i]);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(f.data()),
              static_cast<uInt>(f.size() * sizeof(float)));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace bfm
