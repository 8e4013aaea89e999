#include "bfm/inference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bfm/rng.hpp"
#include "bfm/schedule.hpp"

namespace bfm {

void SamplerConfig::validate() const {
  if (steps_per_segment < 1) {
    throw std::invalid_argument("SamplerConfig: steps_per_segment must be >= 1");
  }
  if (n_samples < 1) throw std::invalid_argument("SamplerConfig: n_samples must be >= 1");
  if (!std::isfinite(guidance.w) || guidance.w < 0.0) {
    throw std::invalid_argument("SamplerConfig: guidance scale must be finite and >= 0");
  }
  if (threads < 1) throw std::invalid_argument("SamplerConfig: threads must be >= 1");
}

Vec euler_step(const Vec& x, const Vec& v, double dt) {
  check_same_dim(x, v, "euler_step");
  if (!(dt > 0.0)) throw std::invalid_argument("euler_step: dt must be > 0");
  if (!all_finite(x) || !all_finite(v)) {
    throw std::invalid_argument("euler_step: non-finite input");
  }
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + dt * v[i];
  return out;
}

namespace {

struct PerSample {
  Vec x;
  int label = 0;
  FlopsLedger cond, null_pass;
  std::vector<std::uint64_t> per_step_macs;  // filled for sample 0 only
};

void run_one_sample(const ModelBundle& bundle, const SamplerConfig& cfg,
                    SamplerMode mode, std::size_t sample_idx, PerSample& out) {
  const int K = cfg.steps_per_segment;
  const int M = bundle.M();
  const int d_x = bundle.dims.d_x;
  const bool use_cfg = cfg.guidance.w != 1.0;
  const int null_label =
      cfg.guidance.null_label >= 0 ? cfg.guidance.null_label : bundle.null_label();
  const bool semfeat = bundle.use_semfeat;
  const bool record_steps = sample_idx == 0;

  Rng rng(derive_seed(cfg.seed, sample_idx));
  out.label = cfg.fixed_label >= 0
                  ? cfg.fixed_label
                  : static_cast<int>(rng.uniform_int(0, bundle.dims.n_classes - 1));
  Vec x = rng.normal_vec(d_x);

  Vec f_start_c, f_start_n;
  for (int m = 1; m <= M; ++m) {
    const double t_lo = bundle.schedule.lower(m);
    const double dt_seg = bundle.schedule.width(m);
    const double dt_step = dt_seg / K;
    for (int k = 0; k < K; ++k) {
      const std::uint64_t macs_before =
          out.cond.total_macs() + out.null_pass.total_macs();
      const double t = t_lo + k * dt_step;
      const SegmentCoords coords = segment_index(t, bundle.schedule);

      Vec f_c, f_n;
      if (semfeat) {
        if (mode == SamplerMode::FullAlign) {
          f_c = align_forward(bundle, x, t, out.label, &out.cond);
          if (use_cfg) f_n = align_forward(bundle, x, t, null_label, &out.null_pass);
        } else {
          if (k == 0) {
            f_start_c = align_forward(bundle, x, t, out.label, &out.cond);
            f_c = f_start_c;
            if (use_cfg) {
              f_start_n = align_forward(bundle, x, t, null_label, &out.null_pass);
              f_n = f_start_n;
            }
          } else {
            f_c = frn_approximate(bundle, f_start_c, x, t, out.label, coords, &out.cond);
            if (use_cfg) {
              f_n = frn_approximate(bundle, f_start_n, x, t, null_label, coords,
                                    &out.null_pass);
            }
          }
        }
      }

      Vec v = velocity_eval(bundle, m, x, t, out.label, f_c, &out.cond);
      if (use_cfg) {
        const Vec v_n = velocity_eval(bundle, m, x, t, null_label, f_n, &out.null_pass);
        v = cfg_combine(v, v_n, cfg.guidance.w);
      }
      x = euler_step(x, v, dt_step);
      if (!all_finite(x)) {
        throw divergence_error("sampler: non-finite state (sample " +
                               std::to_string(sample_idx) + ", segment " +
                               std::to_string(m) + ", step " + std::to_string(k) + ")");
      }
      if (record_steps) {
        out.per_step_macs.push_back(out.cond.total_macs() +
                                    out.null_pass.total_macs() - macs_before);
      }
    }
  }
  out.x = std::move(x);
}

SampleRun run_sampler(const ModelBundle& bundle, const SamplerConfig& cfg,
                      SamplerMode mode) {
  cfg.validate();
  if (mode == SamplerMode::ResidualApprox) {
    if (!bundle.has_frn()) {
      throw unsupported_error("sample_frn: bundle has no feature residual network");
    }
    if (!bundle.use_semfeat) {
      throw unsupported_error("sample_frn: bundle has no alignment network");
    }
  }
  const std::size_t n = static_cast<std::size_t>(cfg.n_samples);
  std::vector<PerSample> per(n);

  const int threads = std::max(1, cfg.threads);
  if (threads == 1 || n == 1) {
    for (std::size_t s = 0; s < n; ++s) run_one_sample(bundle, cfg, mode, s, per[s]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (int tix = 0; tix < threads; ++tix) {
      pool.emplace_back([&, tix] {
        try {
          for (std::size_t s = tix; s < n; s += threads) {
            run_one_sample(bundle, cfg, mode, s, per[s]);
          }
        } catch (...) {
          errs[tix] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs) {
      if (e) std::rethrow_exception(e);
    }
  }

  SampleRun run;
  run.samples.dim = bundle.dims.d_x;
  for (auto& p : per) {
    run.samples.rows.push_back(std::move(p.x));
    run.samples.labels.push_back(p.label);
  }
  for (auto& p : per) {
    run.ledger.merge(p.cond);
    run.ledger.merge_suffixed(p.null_pass, "@null");
  }
  run.ledger.solver_steps =
      static_cast<std::uint64_t>(bundle.M()) * cfg.steps_per_segment;
  run.ledger.n_samples = n;
  run.ledger.per_step_macs = std::move(per[0].per_step_macs);
  return run;
}

}  // namespace

SampleRun sample_full(const ModelBundle& bundle, const SamplerConfig& cfg) {
  if (cfg.mode != SamplerMode::FullAlign) {
    throw std::invalid_argument("sample_full: cfg.mode must be FullAlign");
  }
  return run_sampler(bundle, cfg, SamplerMode::FullAlign);
}

SampleRun sample_frn(const ModelBundle& bundle, const SamplerConfig& cfg) {
  if (cfg.mode != SamplerMode::ResidualApprox) {
    throw std::invalid_argument("sample_frn: cfg.mode must be ResidualApprox");
  }
  return run_sampler(bundle, cfg, SamplerMode::ResidualApprox);
}

FlopsLedger analytic_flops(const ModelBundle& bundle, const SamplerConfig& cfg) {
  cfg.validate();
  const std::uint64_t n = static_cast<std::uint64_t>(cfg.n_samples);
  const std::uint64_t K = static_cast<std::uint64_t>(cfg.steps_per_segment);
  const std::uint64_t M = static_cast<std::uint64_t>(bundle.M());
  const bool use_cfg = cfg.guidance.w != 1.0;
  const bool semfeat = bundle.use_semfeat;

  std::vector<std::uint64_t> vel(M);
  for (std::uint64_t m = 0; m < M; ++m) {
    vel[m] = eval_macs(bundle.velocity_blocks[m].spec);
  }
  const std::uint64_t phi = semfeat ? eval_macs(bundle.align_net.spec) : 0;
  const std::uint64_t eta =
      bundle.has_frn() ? eval_macs(bundle.frn.spec) : eval_macs(bundle.dims.frn_spec());

  FlopsLedger led;
  auto fill_pass = [&](const std::string& suffix) {
    for (std::uint64_t m = 1; m <= M; ++m) {
      led.by_net["v" + std::to_string(m) + suffix] = {n * K, n * K * vel[m - 1]};
    }
    if (!semfeat) return;
    if (cfg.mode == SamplerMode::FullAlign) {
      led.by_net["f_phi" + suffix] = {n * M * K, n * M * K * phi};
    } else {
      led.by_net["f_phi" + suffix] = {n * M, n * M * phi};
      if (K > 1) led.by_net["f_eta" + suffix] = {n * M * (K - 1), n * M * (K - 1) * eta};
    }
  };
  fill_pass("");
  if (use_cfg) fill_pass("@null");

  const std::uint64_t passes = use_cfg ? 2 : 1;
  for (std::uint64_t m = 1; m <= M; ++m) {
    for (std::uint64_t k = 0; k < K; ++k) {
      std::uint64_t step = vel[m - 1];
      if (semfeat) {
        if (cfg.mode == SamplerMode::FullAlign) {
          step += phi;
        } else {
          step += (k == 0) ? phi : eta;
        }
      }
      led.per_step_macs.push_back(step * passes);
    }
  }
  led.solver_steps = M * K;
  led.n_samples = n;
  return led;
}

}  // namespace bfm
