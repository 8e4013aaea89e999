#include <benchmark/benchmark.h>

#include "bfm/analysis.hpp"
#include "bfm/data.hpp"
#include "bfm/inference.hpp"
#include "bfm/metrics.hpp"
#include "bfm/training.hpp"

using namespace bfm;

namespace {

NetDims bench_dims(int hidden) {
  NetDims d;
  d.d_x = 2;
  d.n_classes = 8;
  d.feature_dim = 2;
  d.oracle_dim = 8;
  d.vel_hidden = hidden;
  d.vel_layers = 4;
  d.align_hidden = hidden;
  d.align_layers = 6;
  d.proj_hidden = hidden;
  d.frn_hidden = hidden;
  d.frn_layers = 2;
  d.oracle_hidden = 32;
  return d;
}

SampleSet bench_ring() {
  DatasetSpec spec;
  spec.kind = DatasetKind::GaussianRing;
  spec.n_samples = 4096;
  spec.n_classes = 8;
  spec.seed = 1;
  return make_gaussian_ring(spec);
}

void BM_MlpForwardBackward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  MlpSpec spec;
  spec.in_dim = 2;
  spec.hidden_dim = hidden;
  spec.out_dim = 2;
  spec.n_layers = 4;
  spec.cond_dim = hidden;
  spec.n_labels = 8;
  spec.feature_dim = 2;
  ParamSet p = init_params(spec, 1);
  Rng rng(2);
  Vec x = rng.normal_vec(2), feat = rng.normal_vec(2), gy = rng.normal_vec(2);
  CondCache cache;
  MlpGrads grads = make_grads(p);
  for (auto _ : state) {
    Vec y = cond_forward(p, x, 0.3, 2, feat, cache);
    cond_backward(p, cache, gy, grads);
    benchmark::DoNotOptimize(y.data());
    benchmark::DoNotOptimize(grads.flat.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MlpForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_TrainIteration(benchmark::State& state) {
  TrainConfig cfg;
  cfg.batch_size = 256;
  cfg.iterations = 1;
  cfg.lr = 3e-3;
  cfg.seed = 3;
  cfg.M = 4;
  cfg.dims = bench_dims(static_cast<int>(state.range(0)));
  auto data = bench_ring();
  Stage1Trainer trainer(cfg, data);
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.step());
  }
  state.SetItemsProcessed(state.iterations() * cfg.batch_size);
}
BENCHMARK(BM_TrainIteration)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SampleFull(benchmark::State& state) {
  auto bundle = make_bundle(4, bench_dims(32), 4, true, 7777, true);
  SamplerConfig cfg;
  cfg.steps_per_segment = 16;
  cfg.n_samples = 16;
  cfg.seed = 5;
  for (auto _ : state) {
    auto run = sample_full(bundle, cfg);
    benchmark::DoNotOptimize(run.samples.rows.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_samples);
}
BENCHMARK(BM_SampleFull)->Unit(benchmark::kMillisecond);

void BM_SampleResidual(benchmark::State& state) {
  auto bundle = make_bundle(4, bench_dims(32), 4, true, 7777, true);
  SamplerConfig cfg;
  cfg.steps_per_segment = 16;
  cfg.n_samples = 16;
  cfg.seed = 5;
  cfg.mode = SamplerMode::ResidualApprox;
  for (auto _ : state) {
    auto run = sample_frn(bundle, cfg);
    benchmark::DoNotOptimize(run.samples.rows.data());
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_samples);
}
BENCHMARK(BM_SampleResidual)->Unit(benchmark::kMillisecond);

void BM_PowerSpectrum(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  Rng rng(6);
  Vec img = rng.normal_vec(static_cast<std::size_t>(N) * N);
  for (auto _ : state) {
    auto ps = power_spectrum_2d(img, N);
    benchmark::DoNotOptimize(ps.power.data());
  }
}
BENCHMARK(BM_PowerSpectrum)->Arg(16)->Arg(32)->Arg(64);

void BM_SlicedWasserstein(benchmark::State& state) {
  auto a = bench_ring();
  DatasetSpec spec;
  spec.kind = DatasetKind::GaussianRing;
  spec.n_samples = 4096;
  spec.n_classes = 8;
  spec.seed = 7;
  auto b = make_gaussian_ring(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sliced_wasserstein(a, b, 64, 8));
  }
}
BENCHMARK(BM_SlicedWasserstein)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
