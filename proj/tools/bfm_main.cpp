// bfm: blockwise flow matching experiments on synthetic data.
//
// Subcommands: gen-data, train, train-frn, sample, eval, spectra,
// noise-sweep, pca-features, flops. Every command is deterministic given its
// config and seeds; see README for the config key reference.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "bfm/analysis.hpp"
#include "bfm/checkpoint.hpp"
#include "bfm/config.hpp"
#include "bfm/data.hpp"
#include "bfm/inference.hpp"
#include "bfm/metrics.hpp"
#include "bfm/training.hpp"

namespace {

using namespace bfm;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 0;  // 0 = take run.threads from the config
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path, "flat key=value config file");
  cmd->add_option("--set", opts.sets, "override a config key, e.g. --set train.lr=3e-3");
  cmd->add_option("--threads", opts.threads,
                  "worker threads (deterministic per thread count; default 1)");
}

RunConfig build_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = parse_config(opts.config_path);
  for (const auto& kv : opts.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    }
    apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.threads > 0) cfg.threads = opts.threads;
  cfg.train.threads = cfg.threads;
  cfg.sample.threads = cfg.threads;
  return cfg;
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::string fmt_loss(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

class MetricsCsv {
 public:
  MetricsCsv(const std::string& path, const std::string& run_id)
      : run_id_(run_id) {
    if (path.empty()) return;
    ensure_parent_dir(path);
    const bool fresh = !std::filesystem::exists(path);
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open metrics csv " + path);
    if (fresh) {
      out_ << "run_id,iteration,loss_bfm,loss_align,loss_total,loss_frn,wall_ms\n";
    }
  }

  void row(const LossRow& r) {
    if (!out_.is_open()) return;
    out_ << run_id_ << ',' << r.iteration << ',' << fmt_loss(r.loss_bfm) << ','
         << fmt_loss(r.loss_align) << ',' << fmt_loss(r.loss_total) << ','
         << fmt_loss(r.loss_frn) << ',' << r.wall_ms << '\n';
  }

 private:
  std::string run_id_;
  std::ofstream out_;
};

void check_data_matches(const RunConfig& cfg, const LoadedDataset& data) {
  if (data.set.dim != cfg.train.dims.d_x) {
    throw std::invalid_argument("model.d_x = " + std::to_string(cfg.train.dims.d_x) +
                                " but dataset rows have dim " +
                                std::to_string(data.set.dim));
  }
  if (data.spec.n_classes != cfg.train.dims.n_classes) {
    throw std::invalid_argument(
        "model.n_classes = " + std::to_string(cfg.train.dims.n_classes) +
        " but the dataset declares " + std::to_string(data.spec.n_classes));
  }
}

Checkpoint snapshot_stage1(const Stage1Trainer& trainer, const TrainConfig& cfg) {
  Checkpoint ck;
  ck.stage = 1;
  ck.iteration = trainer.iteration();
  ck.config = cfg;
  ck.bundle = trainer.bundle();
  ck.opt = const_cast<Stage1Trainer&>(trainer).opt_states();
  ck.rng_state = const_cast<Stage1Trainer&>(trainer).rng().serialize();
  return ck;
}

int cmd_gen_data(const CommonOpts& common, const std::string& out) {
  RunConfig cfg = build_config(common);
  cfg.data.validate();
  SampleSet set = make_dataset(cfg.data);
  ensure_parent_dir(out);
  save_dataset(set, cfg.data, out);
  std::cout << "wrote " << set.size() << " samples (dim " << set.dim << ") to " << out
            << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& data_path,
              const std::string& out, const std::string& metrics_path,
              const std::string& resume, int checkpoint_every) {
  RunConfig cfg = build_config(common);
  LoadedDataset data = load_dataset(data_path);

  Checkpoint loaded;
  if (!resume.empty()) {
    loaded = load_checkpoint(resume);
    if (loaded.stage != 1) throw std::invalid_argument("train: checkpoint is not stage 1");
    cfg.train = loaded.config;
    for (const auto& kv : common.sets) {  // allow e.g. extending train.iterations
      const auto eq = kv.find('=');
      apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.train.threads = cfg.threads;
  }
  check_data_matches(cfg, data);
  cfg.train.validate();

  Stage1Trainer trainer(cfg.train, data.set);
  if (!resume.empty()) {
    trainer.restore(loaded.bundle, loaded.opt, loaded.rng_state, loaded.iteration);
  }

  MetricsCsv csv(metrics_path, cfg.run_id);
  ensure_parent_dir(out);
  while (trainer.iteration() < cfg.train.iterations) {
    LossRow row = trainer.step();
    csv.row(row);
    if (checkpoint_every > 0 && trainer.iteration() % checkpoint_every == 0) {
      save_checkpoint(snapshot_stage1(trainer, cfg.train), out);
    }
  }
  save_checkpoint(snapshot_stage1(trainer, cfg.train), out);
  std::cout << "trained " << trainer.iteration() << " iterations, checkpoint: " << out
            << "\n";
  return 0;
}

int cmd_train_frn(const CommonOpts& common, const std::string& ckpt_path,
                  const std::string& data_path, const std::string& out,
                  const std::string& metrics_path, bool direct) {
  RunConfig cfg = build_config(common);
  Checkpoint ck = load_checkpoint(ckpt_path);
  LoadedDataset data = load_dataset(data_path);

  TrainConfig frn_cfg = ck.config;
  frn_cfg.iterations = cfg.train.iterations;
  frn_cfg.lr = cfg.train.lr;
  frn_cfg.batch_size = cfg.train.batch_size;
  frn_cfg.seed = cfg.train.seed;
  frn_cfg.label_drop_prob = cfg.train.label_drop_prob;
  frn_cfg.dims.frn_hidden = cfg.train.dims.frn_hidden;
  frn_cfg.dims.frn_layers = cfg.train.dims.frn_layers;
  frn_cfg.frn_residual = !direct;
  frn_cfg.threads = cfg.threads;
  check_data_matches(cfg, data);

  Stage2Trainer trainer(frn_cfg, data.set, ck.bundle);
  MetricsCsv csv(metrics_path, cfg.run_id);
  for (int i = 0; i < frn_cfg.iterations; ++i) csv.row(trainer.step());

  Checkpoint out_ck;
  out_ck.stage = 2;
  out_ck.iteration = trainer.iteration();
  out_ck.config = frn_cfg;
  out_ck.bundle = ck.bundle;
  out_ck.opt = {trainer.opt_state()};
  out_ck.rng_state = trainer.rng().serialize();
  ensure_parent_dir(out);
  save_checkpoint(out_ck, out);
  std::cout << "trained FRN for " << frn_cfg.iterations
            << " iterations, checkpoint: " << out << "\n";
  return 0;
}

int cmd_sample(const CommonOpts& common, const std::string& ckpt_path,
               const std::string& out, const std::string& ledger_path) {
  RunConfig cfg = build_config(common);
  Checkpoint ck = load_checkpoint(ckpt_path);
  cfg.sample.validate();

  SampleRun run = cfg.sample.mode == SamplerMode::FullAlign
                      ? sample_full(ck.bundle, cfg.sample)
                      : sample_frn(ck.bundle, cfg.sample);

  DatasetSpec out_spec;
  out_spec.kind = DatasetKind::Generated;
  out_spec.n_samples = cfg.sample.n_samples;
  out_spec.n_classes = ck.bundle.dims.n_classes;
  out_spec.dim = ck.bundle.dims.d_x;
  out_spec.seed = cfg.sample.seed;
  // generated values are full doubles; snap to the file's f32 grid
  for (auto& row : run.samples.rows) {
    for (double& v : row) v = f32_round(v);
  }
  ensure_parent_dir(out);
  save_dataset(run.samples, out_spec, out);

  const std::string lpath = ledger_path.empty() ? out + ".flops.json" : ledger_path;
  ensure_parent_dir(lpath);
  std::ofstream lf(lpath, std::ios::trunc);
  lf << run.ledger.to_json_string() << "\n";

  std::cout << "wrote " << run.samples.size() << " samples to " << out
            << " (total MACs " << run.ledger.total_macs() << ", ledger " << lpath
            << ")\n";
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& a_path,
             const std::string& b_path, const std::string& out_csv) {
  RunConfig cfg = build_config(common);
  LoadedDataset A = load_dataset(a_path);
  LoadedDataset B = load_dataset(b_path);

  const double bw = cfg.eval.bandwidth > 0.0
                        ? cfg.eval.bandwidth
                        : median_heuristic_bandwidth(A.set, B.set, cfg.eval.seed);
  const double mmd = mmd_rbf(A.set, B.set, bw);
  const double sw =
      sliced_wasserstein(A.set, B.set, cfg.eval.n_projections, cfg.eval.seed);
  Vec mu_a, mu_b;
  Mat cov_a, cov_b;
  fit_gaussian(A.set, mu_a, cov_a);
  fit_gaussian(B.set, mu_b, cov_b);
  const double w2 = gaussian_w2(mu_a, cov_a, mu_b, cov_b);

  const std::size_t n = std::min(A.set.size(), B.set.size());
  auto emit = [&](std::ostream& os) {
    os << cfg.run_id << ",mmd_rbf," << mmd << ',' << n << ',' << cfg.eval.seed << "\n";
    os << cfg.run_id << ",sliced_wasserstein," << sw << ',' << n << ','
       << cfg.eval.seed << "\n";
    os << cfg.run_id << ",gaussian_w2," << w2 << ',' << n << ',' << cfg.eval.seed
       << "\n";
  };
  if (!out_csv.empty()) {
    ensure_parent_dir(out_csv);
    const bool fresh = !std::filesystem::exists(out_csv);
    std::ofstream f(out_csv, std::ios::app);
    if (fresh) f << "run_id,metric,value,n,seed\n";
    emit(f);
  }
  emit(std::cout);
  return 0;
}

std::vector<Vec> image_rows(const LoadedDataset& d, int& side) {
  side = d.spec.side;
  if (side < 2) {
    // sampler outputs only record the flat dimension; recover N from N*N
    const int root = static_cast<int>(std::lround(std::sqrt(double(d.set.dim))));
    if (root >= 2 && root * root == d.set.dim && (root & (root - 1)) == 0) {
      side = root;
    } else {
      throw std::invalid_argument("dataset does not carry image data");
    }
  }
  return d.set.rows;
}

int cmd_spectra(const CommonOpts& common, const std::string& real_path,
                const std::string& gen_path, const std::string& out_json,
                const std::string& profiles_csv) {
  RunConfig cfg = build_config(common);
  LoadedDataset real = load_dataset(real_path);
  LoadedDataset gen = load_dataset(gen_path);
  int n_real = 0, n_gen = 0;
  auto rr = image_rows(real, n_real);
  auto gg = image_rows(gen, n_gen);
  if (n_real != n_gen) throw std::invalid_argument("image sides differ between sets");
  const int N = n_real;

  auto mean_profile = [&](const std::vector<Vec>& imgs) {
    std::vector<double> acc(N / 2 + 1, 0.0);
    for (const auto& img : imgs) {
      auto prof = azimuthal_integrate(power_spectrum_2d(img, N));
      for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += prof.mean_power[b];
    }
    for (double& v : acc) v /= static_cast<double>(imgs.size());
    return acc;
  };
  const auto pr = mean_profile(rr);
  const auto pg = mean_profile(gg);
  const double fd = frechet_curve_distance(pr, pg);

  nlohmann::json j = {{"run_id", cfg.run_id},
                      {"side", N},
                      {"n_real", rr.size()},
                      {"n_generated", gg.size()},
                      {"frechet_distance", fd}};
  if (!out_json.empty()) {
    ensure_parent_dir(out_json);
    std::ofstream f(out_json, std::ios::trunc);
    f << j.dump(2) << "\n";
  }
  if (!profiles_csv.empty()) {
    ensure_parent_dir(profiles_csv);
    std::ofstream f(profiles_csv, std::ios::trunc);
    f << "radius,mean_power_real,mean_power_generated\n";
    for (std::size_t b = 0; b < pr.size(); ++b) {
      f << b << ',' << pr[b] << ',' << pg[b] << "\n";
    }
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_noise_sweep(const CommonOpts& common, const std::string& data_path,
                    const std::string& out_csv) {
  RunConfig cfg = build_config(common);
  LoadedDataset data = load_dataset(data_path);
  int side = 0;
  auto imgs = image_rows(data, side);
  auto rep = noise_sweep_report(imgs, side, cfg.analysis.timesteps, cfg.analysis.seed);

  std::ostringstream body;
  body << "t,se,hfr\n";
  for (std::size_t i = 0; i < rep.t.size(); ++i) {
    body << rep.t[i] << ',' << rep.se[i] << ',' << rep.hfr[i] << "\n";
  }
  if (!out_csv.empty()) {
    ensure_parent_dir(out_csv);
    std::ofstream f(out_csv, std::ios::trunc);
    f << body.str();
  }
  std::cout << body.str();
  return 0;
}

int cmd_pca_features(const CommonOpts& common, const std::string& ckpt_path,
                     const std::string& data_path, const std::string& out_csv,
                     int n_samples, int k) {
  RunConfig cfg = build_config(common);
  Checkpoint ck = load_checkpoint(ckpt_path);
  LoadedDataset data = load_dataset(data_path);
  if (!ck.bundle.use_semfeat) {
    throw std::invalid_argument("pca-features: checkpoint has no alignment network");
  }

  // features of n samples across the configured timesteps, one shared noise
  // draw per sample
  Rng rng(cfg.analysis.seed);
  struct Item { Vec x1, eps; int label; };
  std::vector<Item> items;
  for (int i = 0; i < n_samples; ++i) {
    const std::size_t idx = rng.uniform_int(0, data.set.size() - 1);
    items.push_back({data.set.rows[idx], rng.normal_vec(data.set.dim),
                     data.set.labels[idx]});
  }
  std::vector<Vec> feats;
  std::vector<std::pair<int, double>> meta;  // (sample, t)
  for (const auto& it : items) {
    for (double t : cfg.analysis.timesteps) {
      Vec x_t(it.x1.size());
      for (std::size_t d = 0; d < x_t.size(); ++d) {
        x_t[d] = t * it.x1[d] + (1.0 - t) * it.eps[d];
      }
      feats.push_back(align_forward(ck.bundle, x_t, t, it.label));
      meta.push_back({static_cast<int>(&it - items.data()), t});
    }
  }
  auto pca = pca_top_k(feats, k);

  std::ostringstream body;
  body << "sample,t";
  for (int c = 0; c < k; ++c) body << ",pc" << (c + 1);
  body << "\n";
  for (std::size_t i = 0; i < feats.size(); ++i) {
    body << meta[i].first << ',' << meta[i].second;
    for (int c = 0; c < k; ++c) body << ',' << pca.projections[i][c];
    body << "\n";
  }
  if (!out_csv.empty()) {
    ensure_parent_dir(out_csv);
    std::ofstream f(out_csv, std::ios::trunc);
    f << body.str();
  }
  std::cout << "pca on " << feats.size() << " features; leading eigenvalues:";
  for (int c = 0; c < k; ++c) std::cout << ' ' << pca.eigenvalues[c];
  std::cout << "\n";
  if (out_csv.empty()) std::cout << body.str();
  return 0;
}

int cmd_flops(const CommonOpts& common, int square_width, int mono_layers,
              int block_layers, const std::string& out_json) {
  RunConfig cfg = build_config(common);

  // layer-count ratio for equal-width square trunks (in = hidden = out)
  MlpSpec mono;
  mono.in_dim = mono.hidden_dim = mono.out_dim = square_width;
  mono.n_layers = mono_layers;
  mono.cond_dim = square_width % 2 == 0 ? square_width : 0;
  MlpSpec block = mono;
  block.n_layers = block_layers;
  const double ratio =
      static_cast<double>(eval_macs(block)) / static_cast<double>(eval_macs(mono));
  std::cout << "square trunk width " << square_width << ": monolithic " << mono_layers
            << " layers = " << eval_macs(mono) << " MACs/step, block " << block_layers
            << " layers = " << eval_macs(block) << " MACs/step, per-step ratio = "
            << ratio << "\n";

  // analytic ledgers for the configured bundle in both sampler modes
  ModelBundle bundle = make_bundle(cfg.train.M, cfg.train.dims, cfg.train.seed,
                                   cfg.train.use_semfeat, cfg.train.oracle_seed,
                                   /*with_frn=*/cfg.train.use_semfeat);
  nlohmann::json j;
  j["per_step_ratio"] = ratio;
  std::vector<double> ws{1.0};
  if (cfg.sample.guidance.w != 1.0) ws.push_back(cfg.sample.guidance.w);
  for (double w : ws) {
    SamplerConfig sc = cfg.sample;
    sc.guidance.w = w;
    sc.mode = SamplerMode::FullAlign;
    auto full = analytic_flops(bundle, sc);
    nlohmann::json entry;
    entry["full"] = nlohmann::json::parse(full.to_json_string());
    if (bundle.use_semfeat) {
      sc.mode = SamplerMode::ResidualApprox;
      auto frn = analytic_flops(bundle, sc);
      entry["frn"] = nlohmann::json::parse(frn.to_json_string());
      entry["frn_vs_full_macs"] =
          static_cast<double>(frn.total_macs()) / full.total_macs();
    }
    j[w == 1.0 ? "no_guidance" : "guidance"] = entry;
    std::cout << "mode=full w=" << w << ": " << full.avg_gflops_per_step()
              << " GFLOPs/step (MACs convention)\n";
  }
  if (!out_json.empty()) {
    ensure_parent_dir(out_json);
    std::ofstream f(out_json, std::ios::trunc);
    f << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blockwise flow matching on synthetic data"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string data_path, out, metrics_path, resume, ckpt_path, ledger_path;
  std::string a_path, b_path, real_path, gen_path, profiles_csv;
  int checkpoint_every = 0, n_samples = 50, pca_k = 3;
  int square_width = 384, mono_layers = 12, block_layers = 8;
  bool direct = false;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset file");
  add_common(gen, common);
  gen->add_option("-o,--out", out, "output dataset path")->required();

  auto* train = app.add_subcommand("train", "stage-1 training (velocity blocks + alignment)");
  add_common(train, common);
  train->add_option("--data", data_path, "training dataset file")->required();
  train->add_option("-o,--out", out, "checkpoint output path")->required();
  train->add_option("--metrics", metrics_path, "append per-iteration losses to this csv");
  train->add_option("--resume", resume, "resume from a stage-1 checkpoint");
  train->add_option("--checkpoint-every", checkpoint_every,
                    "also save every N iterations");

  auto* tfrn = app.add_subcommand("train-frn", "stage-2 feature residual training");
  add_common(tfrn, common);
  tfrn->add_option("--checkpoint", ckpt_path, "stage-1 checkpoint")->required();
  tfrn->add_option("--data", data_path, "training dataset file")->required();
  tfrn->add_option("-o,--out", out, "stage-2 checkpoint output path")->required();
  tfrn->add_option("--metrics", metrics_path, "append per-iteration losses to this csv");
  tfrn->add_flag("--direct", direct,
                 "ablation: direct prediction instead of the residual form");

  auto* sample = app.add_subcommand("sample", "generate samples from a checkpoint");
  add_common(sample, common);
  sample->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
  sample->add_option("-o,--out", out, "output samples file")->required();
  sample->add_option("--ledger", ledger_path, "FLOPs ledger json (default <out>.flops.json)");

  auto* eval = app.add_subcommand("eval", "two-sample metrics between dataset files");
  add_common(eval, common);
  eval->add_option("--a", a_path, "first dataset file")->required();
  eval->add_option("--b", b_path, "second dataset file")->required();
  eval->add_option("-o,--out", out, "append rows to this csv");

  auto* spectra = app.add_subcommand(
      "spectra", "mean radial power profiles and their Fréchet distance");
  add_common(spectra, common);
  spectra->add_option("--real", real_path, "reference image dataset")->required();
  spectra->add_option("--generated", gen_path, "generated image dataset")->required();
  spectra->add_option("-o,--out", out, "result json path");
  spectra->add_option("--profiles", profiles_csv, "write both radial profiles to csv");

  auto* sweep = app.add_subcommand("noise-sweep",
                                   "SE and HFR across interpolation timesteps");
  add_common(sweep, common);
  sweep->add_option("--data", data_path, "image dataset file")->required();
  sweep->add_option("-o,--out", out, "output csv path");

  auto* pca = app.add_subcommand("pca-features",
                                 "PCA of alignment features across timesteps");
  add_common(pca, common);
  pca->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
  pca->add_option("--data", data_path, "dataset file")->required();
  pca->add_option("-o,--out", out, "output csv path");
  pca->add_option("-n,--n-samples", n_samples, "samples to featurize");
  pca->add_option("-k", pca_k, "number of components");

  auto* flops = app.add_subcommand("flops", "analytic MAC accounting");
  add_common(flops, common);
  flops->add_option("--square-width", square_width, "width for the layer-ratio table");
  flops->add_option("--mono-layers", mono_layers, "monolithic trunk depth");
  flops->add_option("--block-layers", block_layers, "velocity block depth");
  flops->add_option("-o,--out", out, "ledger json path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(common, out);
    if (train->parsed()) {
      return cmd_train(common, data_path, out, metrics_path, resume, checkpoint_every);
    }
    if (tfrn->parsed()) {
      return cmd_train_frn(common, ckpt_path, data_path, out, metrics_path, direct);
    }
    if (sample->parsed()) return cmd_sample(common, ckpt_path, out, ledger_path);
    if (eval->parsed()) return cmd_eval(common, a_path, b_path, out);
    if (spectra->parsed()) return cmd_spectra(common, real_path, gen_path, out, profiles_csv);
    if (sweep->parsed()) return cmd_noise_sweep(common, data_path, out);
    if (pca->parsed()) {
      return cmd_pca_features(common, ckpt_path, data_path, out, n_samples, pca_k);
    }
    if (flops->parsed()) {
      return cmd_flops(common, square_width, mono_layers, block_layers, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
