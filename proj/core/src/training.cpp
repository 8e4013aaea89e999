#include "bfm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace bfm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct WorkItem {
  int m = 0;         // 1-based segment
  std::size_t idx;   // dataset row
  int label = 0;     // possibly the null label
  double t = 0;
  Vec eps;
};

// chunk [lo, hi) ranges for n items over T threads
std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n, int threads) {
  const std::size_t t = std::max(1, threads);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t base = n / t;
  const std::size_t rem = n % t;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < t && lo < n; ++i) {
    std::size_t hi = lo + base + (i < rem ? 1 : 0);
    out.push_back({lo, hi});
    lo = hi;
  }
  return out;
}

void add_into(Vec& dst, const Vec& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// d(-cos(h, h*))/dh for unit-norm h*
Vec align_loss_grad(const Vec& h, const Vec& h_star) {
  double hn = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    hn += h[i] * h[i];
    dot += h[i] * h_star[i];
  }
  hn = std::sqrt(hn);
  if (!(hn > 0.0)) throw std::invalid_argument("align_loss: zero-norm vector");
  Vec g(h.size());
  const double inv = 1.0 / hn;
  const double inv3 = inv * inv * inv;
  for (std::size_t i = 0; i < h.size(); ++i) {
    g[i] = -(h_star[i] * inv - dot * h[i] * inv3);
  }
  return g;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1 || iterations < 0) {
    throw std::invalid_argument("TrainConfig: bad batch size or iteration count");
  }
  if (M < 1) throw std::invalid_argument("TrainConfig: M must be >= 1");
  if (batch_size % M != 0) {
    throw std::invalid_argument("TrainConfig: batch_size must be divisible by M (got B=" +
                                std::to_string(batch_size) + ", M=" + std::to_string(M) + ")");
  }
  if (lambda_align < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
  if (!(label_drop_prob >= 0.0 && label_drop_prob <= 1.0)) {
    throw std::invalid_argument("TrainConfig: label_drop_prob outside [0, 1]");
  }
  if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
}

std::vector<std::vector<int>> partition_batch(int B, int M, Rng& rng) {
  if (M < 1 || B < 1 || B % M != 0) {
    throw std::invalid_argument("partition_batch: M must divide B");
  }
  std::vector<int> perm(B);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const int per = B / M;
  std::vector<std::vector<int>> groups(M);
  for (int m = 0; m < M; ++m) {
    groups[m].assign(perm.begin() + static_cast<std::ptrdiff_t>(m) * per,
                     perm.begin() + static_cast<std::ptrdiff_t>(m + 1) * per);
  }
  return groups;
}

double align_loss(const Vec& h, const Vec& h_star) {
  check_same_dim(h, h_star, "align_loss");
  double hn = 0.0, sn = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    hn += h[i] * h[i];
    sn += h_star[i] * h_star[i];
    dot += h[i] * h_star[i];
  }
  if (!(hn > 0.0) || !(sn > 0.0)) {
    throw std::invalid_argument("align_loss: zero-norm vector");
  }
  return -dot / (std::sqrt(hn) * std::sqrt(sn));
}

double bfm_loss(const Vec& v_hat, const Vec& v_target) {
  check_same_dim(v_hat, v_target, "bfm_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < v_hat.size(); ++i) {
    const double e = v_hat[i] - v_target[i];
    acc += e * e;
  }
  return acc / static_cast<double>(v_hat.size());
}

double frn_loss(const Vec& f_hat, const Vec& f_t) { return bfm_loss(f_hat, f_t); }

SampleLosses stage1_sample_grads(const ModelBundle& bundle, double lambda,
                                 double sample_weight, const Vec& x1, const Vec& eps,
                                 int m, double t, int label, MlpGrads& block_grads,
                                 MlpGrads* align_grads, MlpGrads* proj_grads,
                                 Stage1Scratch& s) {
  const bool semfeat = bundle.use_semfeat;
  const int d_x = bundle.dims.d_x;
  const double t_lo = bundle.schedule.lower(m);
  const double t_hi = bundle.schedule.upper(m);
  segment_endpoints(x1, eps, t_lo, t_hi, s.x_lo, s.x_hi);
  SegmentCoords coords;
  coords.m = m;
  coords.dt = t_hi - t_lo;
  coords.a = coords.b = (t - t_lo) / coords.dt;
  const Vec x_t = interpolate_within(s.x_lo, s.x_hi, coords);
  const Vec v_t = segment_velocity_target(s.x_lo, s.x_hi, coords.dt);

  Vec f_t;
  if (semfeat) f_t = cond_forward(bundle.align_net, x_t, t, label, {}, s.cache_f);
  const Vec v_hat =
      cond_forward(bundle.velocity_blocks[m - 1], x_t, t, label, f_t, s.cache_v);

  SampleLosses losses;
  losses.bfm = bfm_loss(v_hat, v_t);
  Vec g_v(v_hat.size());
  const double sv = 2.0 * sample_weight / static_cast<double>(d_x);
  for (int i = 0; i < d_x; ++i) g_v[i] = sv * (v_hat[i] - v_t[i]);
  cond_backward(bundle.velocity_blocks[m - 1], s.cache_v, g_v, block_grads,
                semfeat ? &s.g_feat : nullptr);

  if (semfeat) {
    const Vec h_star = oracle_encode(bundle, x1);
    const Vec h = mlp_forward(bundle.proj_head, f_t, {}, s.cache_p);
    losses.align = align_loss(h, h_star);
    Vec g_h = align_loss_grad(h, h_star);
    for (double& g : g_h) g *= lambda * sample_weight;
    mlp_backward(bundle.proj_head, s.cache_p, g_h, *proj_grads);
    Vec g_f = proj_grads->grad_x;  // alignment path into f_t
    add_into(g_f, s.g_feat);       // velocity path into f_t
    cond_backward(bundle.align_net, s.cache_f, g_f, *align_grads);
  }
  return losses;
}

double stage2_sample_grads(const ModelBundle& bundle, bool residual,
                           double sample_weight, const Vec& x1, const Vec& eps, int m,
                           double t, int label, MlpGrads& frn_grads, Stage2Scratch& s) {
  const int F = bundle.dims.feature_dim;
  const double t_lo = bundle.schedule.lower(m);
  const double t_hi = bundle.schedule.upper(m);
  segment_endpoints(x1, eps, t_lo, t_hi, s.x_lo, s.x_hi);
  SegmentCoords coords;
  coords.m = m;
  coords.dt = t_hi - t_lo;
  coords.a = coords.b = (t - t_lo) / coords.dt;
  const Vec x_t = interpolate_within(s.x_lo, s.x_hi, coords);

  const Vec f_start = cond_forward(bundle.align_net, s.x_lo, t_lo, label, {}, s.cache_tmp);
  const Vec f_t = cond_forward(bundle.align_net, x_t, t, label, {}, s.cache_tmp);
  const Vec r = cond_forward(bundle.frn, x_t, t, label, {}, s.cache_r);
  Vec f_hat(F);
  for (int i = 0; i < F; ++i) {
    f_hat[i] = residual ? f_start[i] + coords.b * r[i] : r[i];
  }
  const double loss = frn_loss(f_hat, f_t);
  Vec g_r(F);
  const double scale =
      2.0 * sample_weight / static_cast<double>(F) * (residual ? coords.b : 1.0);
  for (int i = 0; i < F; ++i) g_r[i] = scale * (f_hat[i] - f_t[i]);
  cond_backward(bundle.frn, s.cache_r, g_r, frn_grads);
  return loss;
}

// ---------------------------------------------------------------- stage 1 --

Stage1Trainer::Stage1Trainer(const TrainConfig& config, const SampleSet& data)
    : config_(config), data_(&data) {
  config_.validate();
  if (data.size() == 0) throw std::invalid_argument("Stage1Trainer: empty dataset");
  if (data.dim != config_.dims.d_x) {
    throw std::invalid_argument("Stage1Trainer: dataset dim does not match d_x");
  }
  bundle_ = make_bundle(config_.M, config_.dims, config_.seed, config_.use_semfeat,
                        config_.oracle_seed);
  for (auto& blk : bundle_.velocity_blocks) {
    opt_.push_back(make_opt_state(blk, config_.lr, config_.weight_decay));
  }
  if (config_.use_semfeat) {
    opt_.push_back(make_opt_state(bundle_.align_net, config_.lr, config_.weight_decay));
    opt_.push_back(make_opt_state(bundle_.proj_head, config_.lr, config_.weight_decay));
  }
  rng_ = Rng(derive_seed(config_.seed, 10001));
}

void Stage1Trainer::restore(ModelBundle bundle, std::vector<OptState> opt,
                            const std::string& rng_state, std::int64_t iteration) {
  bundle_ = std::move(bundle);
  opt_ = std::move(opt);
  rng_.deserialize(rng_state);
  iteration_ = iteration;
}

LossRow Stage1Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const int B = config_.batch_size;
  const int M = config_.M;
  const int d_x = config_.dims.d_x;
  const double lam = config_.lambda_align;
  const bool semfeat = config_.use_semfeat;
  const int null_label = bundle_.null_label();

  // One sequential randomness phase keeps the draw order independent of the
  // compute parallelism: indices, label drops, partition, then per-sample
  // (t, eps) in segment order.
  std::vector<std::size_t> idx(B);
  for (int i = 0; i < B; ++i) idx[i] = rng_.uniform_int(0, data_->size() - 1);
  std::vector<int> labels(B);
  for (int i = 0; i < B; ++i) {
    const int c = data_->labels[idx[i]];
    labels[i] = (rng_.uniform() < config_.label_drop_prob) ? null_label : c;
  }
  auto groups = partition_batch(B, M, rng_);
  std::vector<WorkItem> items;
  items.reserve(B);
  for (int m = 1; m <= M; ++m) {
    const double t_lo = bundle_.schedule.lower(m);
    const double t_hi = bundle_.schedule.upper(m);
    for (int b : groups[m - 1]) {
      WorkItem it;
      it.m = m;
      it.idx = idx[b];
      it.label = labels[b];
      it.t = rng_.uniform(t_lo, t_hi);
      it.eps = rng_.normal_vec(d_x);
      items.push_back(std::move(it));
    }
  }

  struct Buffers {
    std::vector<MlpGrads> blocks;
    MlpGrads align, proj;
    double bfm_sum = 0, align_sum = 0;
  };
  auto make_buffers = [&]() {
    Buffers buf;
    buf.blocks.reserve(M);
    for (auto& blk : bundle_.velocity_blocks) buf.blocks.push_back(make_grads(blk));
    if (semfeat) {
      buf.align = make_grads(bundle_.align_net);
      buf.proj = make_grads(bundle_.proj_head);
    }
    return buf;
  };

  auto run_chunk = [&](std::size_t lo, std::size_t hi, Buffers& buf) {
    Stage1Scratch scratch;
    const double weight = 1.0 / B;
    for (std::size_t w = lo; w < hi; ++w) {
      const WorkItem& it = items[w];
      SampleLosses l = stage1_sample_grads(
          bundle_, lam, weight, data_->rows[it.idx], it.eps, it.m, it.t, it.label,
          buf.blocks[it.m - 1], semfeat ? &buf.align : nullptr,
          semfeat ? &buf.proj : nullptr, scratch);
      buf.bfm_sum += l.bfm;
      buf.align_sum += l.align;
    }
  };

  std::vector<Buffers> bufs;
  const auto ranges = chunk_ranges(items.size(), config_.threads);
  for (std::size_t i = 0; i < ranges.size(); ++i) bufs.push_back(make_buffers());
  if (ranges.size() == 1) {
    run_chunk(ranges[0].first, ranges[0].second, bufs[0]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(ranges.size());
    pool.reserve(ranges.size());
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      pool.emplace_back([&, i] {
        try {
          run_chunk(ranges[i].first, ranges[i].second, bufs[i]);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs) {
      if (e) std::rethrow_exception(e);
    }
  }
  // fixed-order reduction: chunk 0, 1, 2, ...
  for (std::size_t i = 1; i < bufs.size(); ++i) {
    for (int m = 0; m < M; ++m) add_into(bufs[0].blocks[m].flat, bufs[i].blocks[m].flat);
    if (semfeat) {
      add_into(bufs[0].align.flat, bufs[i].align.flat);
      add_into(bufs[0].proj.flat, bufs[i].proj.flat);
    }
    bufs[0].bfm_sum += bufs[i].bfm_sum;
    bufs[0].align_sum += bufs[i].align_sum;
  }

  LossRow row;
  row.iteration = iteration_;
  row.loss_bfm = bufs[0].bfm_sum / B;
  row.loss_align = semfeat ? bufs[0].align_sum / B : kNaN;
  row.loss_total = semfeat ? row.loss_bfm + lam * row.loss_align : row.loss_bfm;
  row.loss_frn = kNaN;
  if (!std::isfinite(row.loss_total)) {
    throw divergence_error("stage-1 loss diverged at iteration " +
                           std::to_string(iteration_));
  }

  for (int m = 0; m < M; ++m) {
    adamw_step(bundle_.velocity_blocks[m], bufs[0].blocks[m].flat, opt_[m]);
  }
  if (semfeat) {
    adamw_step(bundle_.align_net, bufs[0].align.flat, opt_[M]);
    adamw_step(bundle_.proj_head, bufs[0].proj.flat, opt_[M + 1]);
  }
  iteration_ += 1;
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0).count();
  return row;
}

// ---------------------------------------------------------------- stage 2 --

Stage2Trainer::Stage2Trainer(const TrainConfig& config, const SampleSet& data,
                             ModelBundle& bundle)
    : config_(config), data_(&data), bundle_(&bundle) {
  config_.validate();
  if (!bundle.use_semfeat) {
    throw unsupported_error("Stage2Trainer: bundle has no alignment network to distill");
  }
  if (data.size() == 0) throw std::invalid_argument("Stage2Trainer: empty dataset");
  if (config_.M != bundle.M()) {
    throw std::invalid_argument("Stage2Trainer: config M does not match bundle");
  }
  if (!bundle.has_frn()) {
    bundle.frn = init_frn(bundle.dims, derive_seed(config_.seed, 3));
  }
  opt_ = make_opt_state(bundle.frn, config_.lr, config_.weight_decay);
  rng_ = Rng(derive_seed(config_.seed, 20001));
}

void Stage2Trainer::restore(OptState opt, const std::string& rng_state,
                            std::int64_t iteration) {
  opt_ = std::move(opt);
  rng_.deserialize(rng_state);
  iteration_ = iteration;
}

LossRow Stage2Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const int B = config_.batch_size;
  const int M = bundle_->M();
  const int d_x = bundle_->dims.d_x;
  const bool residual = config_.frn_residual;
  const int null_label = bundle_->null_label();

  std::vector<std::size_t> idx(B);
  for (int i = 0; i < B; ++i) idx[i] = rng_.uniform_int(0, data_->size() - 1);
  std::vector<int> labels(B);
  for (int i = 0; i < B; ++i) {
    const int c = data_->labels[idx[i]];
    labels[i] = (rng_.uniform() < config_.label_drop_prob) ? null_label : c;
  }
  std::vector<WorkItem> items(B);
  for (int i = 0; i < B; ++i) {
    WorkItem& it = items[i];
    it.idx = idx[i];
    it.label = labels[i];
    it.m = static_cast<int>(rng_.uniform_int(1, M));
    it.t = rng_.uniform(bundle_->schedule.lower(it.m), bundle_->schedule.upper(it.m));
    it.eps = rng_.normal_vec(d_x);
  }

  struct Buffers {
    MlpGrads frn;
    double loss_sum = 0;
  };
  auto run_chunk = [&](std::size_t lo, std::size_t hi, Buffers& buf) {
    Stage2Scratch scratch;
    const double weight = 1.0 / B;
    for (std::size_t w = lo; w < hi; ++w) {
      const WorkItem& it = items[w];
      buf.loss_sum +=
          stage2_sample_grads(*bundle_, residual, weight, data_->rows[it.idx], it.eps,
                              it.m, it.t, it.label, buf.frn, scratch);
    }
  };

  const auto ranges = chunk_ranges(items.size(), config_.threads);
  std::vector<Buffers> bufs(ranges.size());
  for (auto& b : bufs) b.frn = make_grads(bundle_->frn);
  if (ranges.size() == 1) {
    run_chunk(ranges[0].first, ranges[0].second, bufs[0]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(ranges.size());
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      pool.emplace_back([&, i] {
        try {
          run_chunk(ranges[i].first, ranges[i].second, bufs[i]);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (std::size_t i = 1; i < bufs.size(); ++i) {
    add_into(bufs[0].frn.flat, bufs[i].frn.flat);
    bufs[0].loss_sum += bufs[i].loss_sum;
  }

  LossRow row;
  row.iteration = iteration_;
  row.loss_bfm = kNaN;
  row.loss_align = kNaN;
  row.loss_total = kNaN;
  row.loss_frn = bufs[0].loss_sum / B;
  if (!std::isfinite(row.loss_frn)) {
    throw divergence_error("stage-2 loss diverged at iteration " +
                           std::to_string(iteration_));
  }
  adamw_step(bundle_->frn, bufs[0].frn.flat, opt_);
  iteration_ += 1;
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0).count();
  return row;
}

// ---------------------------------------------------------------- wrappers --

ModelBundle train_bfm(const TrainConfig& config, const SampleSet& data, LossReport* report) {
  Stage1Trainer trainer(config, data);
  for (int i = 0; i < config.iterations; ++i) {
    LossRow row = trainer.step();
    if (report) report->push_back(row);
  }
  return std::move(trainer.bundle());
}

ModelBundle train_monolithic_fm(TrainConfig config, const SampleSet& data,
                                LossReport* report) {
  config.M = 1;
  config.use_semfeat = false;
  config.lambda_align = 0.0;
  return train_bfm(config, data, report);
}

void train_frn(const TrainConfig& config, const SampleSet& data, ModelBundle& bundle,
               LossReport* report) {
  Stage2Trainer trainer(config, data, bundle);
  for (int i = 0; i < config.iterations; ++i) {
    LossRow row = trainer.step();
    if (report) report->push_back(row);
  }
}

}  // namespace bfm
