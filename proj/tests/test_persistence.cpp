#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bfm/checkpoint.hpp"
#include "bfm/config.hpp"
#include "bfm/data.hpp"

using namespace bfm;

namespace {

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TrainConfig small_config() {
  TrainConfig c;
  c.batch_size = 32;
  c.iterations = 20;
  c.lr = 3e-3;
  c.seed = 77;
  c.M = 2;
  c.dims.d_x = 2;
  c.dims.n_classes = 8;
  c.dims.feature_dim = 2;
  c.dims.oracle_dim = 8;
  c.dims.vel_hidden = 8;
  c.dims.vel_layers = 2;
  c.dims.align_hidden = 8;
  c.dims.align_layers = 2;
  c.dims.proj_hidden = 8;
  c.dims.frn_hidden = 8;
  c.dims.frn_layers = 2;
  c.dims.oracle_hidden = 8;
  return c;
}

SampleSet ring(int n = 512) {
  DatasetSpec spec;
  spec.kind = DatasetKind::GaussianRing;
  spec.n_samples = n;
  spec.n_classes = 8;
  spec.seed = 17;
  return make_gaussian_ring(spec);
}

}  // namespace

TEST_CASE("config defaults follow the reference hyperparameters") {
  RunConfig cfg = parse_config_text("run.id = demo\n");
  CHECK(cfg.run_id == "demo");
  CHECK(cfg.train.M == 6);
  CHECK(cfg.train.lambda_align == 0.5);
  CHECK(cfg.train.lr == 1e-4);
  CHECK(cfg.train.batch_size == 864);
}

TEST_CASE("config errors carry the key path") {
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(apply_config_kv(cfg, "train.nope", "1"),
                       doctest::Contains("train.nope"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_kv(cfg, "train.batch_size", "many"),
                       doctest::Contains("train.batch_size"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("a line without equals\n"), std::invalid_argument);

  RunConfig bad = parse_config_text("train.batch_size = 10\ntrain.m_segments = 4\n");
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("config dump round trip") {
  RunConfig cfg = parse_config_text(
      "run.id = rt\n"
      "run.out_dir = /tmp/rt\n"
      "data.kind = checkerboard\n"
      "data.n_samples = 4096\n"
      "data.seed = 12\n"
      "model.vel_hidden = 48\n"
      "train.batch_size = 96\n"
      "train.m_segments = 4\n"
      "train.lambda = 0.25\n"
      "train.use_semfeat = false\n"
      "sample.mode = frn\n"
      "sample.guidance_w = 4\n"
      "analysis.timesteps = 0,0.5,1\n");
  RunConfig again = parse_config_text(dump_config(cfg));
  CHECK(config_equal(cfg, again));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto cfg = small_config();
  auto data = ring();
  Stage1Trainer trainer(cfg, data);
  for (int i = 0; i < 5; ++i) trainer.step();

  Checkpoint ck;
  ck.stage = 1;
  ck.iteration = trainer.iteration();
  ck.config = cfg;
  ck.bundle = trainer.bundle();
  ck.opt = trainer.opt_states();
  ck.rng_state = trainer.rng().serialize();

  const std::string path = tmp_path("bfm_test_ck.bfmc");
  save_checkpoint(ck, path);
  Checkpoint back = load_checkpoint(path);

  CHECK(back.stage == 1);
  CHECK(back.iteration == 5);
  CHECK(back.config == cfg);
  CHECK(back.rng_state == ck.rng_state);
  REQUIRE(back.bundle.velocity_blocks.size() == 2);
  for (int m = 0; m < 2; ++m) {
    CHECK(back.bundle.velocity_blocks[m].flat == ck.bundle.velocity_blocks[m].flat);
  }
  CHECK(back.bundle.align_net.flat == ck.bundle.align_net.flat);
  CHECK(back.bundle.proj_head.flat == ck.bundle.proj_head.flat);
  CHECK(back.bundle.oracle.flat == ck.bundle.oracle.flat);
  REQUIRE(back.opt.size() == ck.opt.size());
  for (std::size_t i = 0; i < ck.opt.size(); ++i) {
    CHECK(back.opt[i].m == ck.opt[i].m);
    CHECK(back.opt[i].v == ck.opt[i].v);
    CHECK(back.opt[i].step == ck.opt[i].step);
  }

  SUBCASE("truncated checkpoint is rejected") {
    std::string bytes = slurp(path);
    spit(path, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path), format_error);
  }
  SUBCASE("corrupt magic is rejected") {
    std::string bytes = slurp(path);
    bytes[1] = 'Z';
    spit(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), format_error);
  }
  SUBCASE("version mismatch is rejected, not migrated") {
    std::string bytes = slurp(path);
    bytes[4] = 7;
    spit(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), format_error);
  }
  SUBCASE("flipped parameter byte fails the checksum") {
    std::string bytes = slurp(path);
    bytes[bytes.size() - 12] ^= 0x10;
    spit(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), format_error);
  }
  std::remove(path.c_str());
}

TEST_CASE("resume at iteration k matches the uninterrupted run bit-exactly") {
  auto cfg = small_config();
  auto data = ring();

  // uninterrupted: 20 iterations
  Stage1Trainer full(cfg, data);
  LossReport full_losses;
  for (int i = 0; i < 20; ++i) full_losses.push_back(full.step());

  // interrupted at 10, saved, reloaded, resumed
  Stage1Trainer half(cfg, data);
  for (int i = 0; i < 10; ++i) half.step();
  Checkpoint ck;
  ck.stage = 1;
  ck.iteration = half.iteration();
  ck.config = cfg;
  ck.bundle = half.bundle();
  ck.opt = half.opt_states();
  ck.rng_state = half.rng().serialize();
  const std::string path = tmp_path("bfm_test_resume.bfmc");
  save_checkpoint(ck, path);

  Checkpoint loaded = load_checkpoint(path);
  Stage1Trainer resumed(loaded.config, data);
  resumed.restore(loaded.bundle, loaded.opt, loaded.rng_state, loaded.iteration);
  LossReport tail;
  for (int i = 0; i < 10; ++i) tail.push_back(resumed.step());

  for (int i = 0; i < 10; ++i) {
    CHECK(tail[i].iteration == full_losses[10 + i].iteration);
    CHECK(tail[i].loss_bfm == full_losses[10 + i].loss_bfm);
    CHECK(tail[i].loss_align == full_losses[10 + i].loss_align);
    CHECK(tail[i].loss_total == full_losses[10 + i].loss_total);
  }
  for (int m = 0; m < 2; ++m) {
    CHECK(resumed.bundle().velocity_blocks[m].flat ==
          full.bundle().velocity_blocks[m].flat);
  }
  CHECK(resumed.bundle().align_net.flat == full.bundle().align_net.flat);
  CHECK(resumed.bundle().proj_head.flat == full.bundle().proj_head.flat);
  CHECK(resumed.rng().serialize() == full.rng().serialize());
  std::remove(path.c_str());
}

TEST_CASE("stage-2 checkpoint carries the FRN") {
  auto cfg = small_config();
  auto data = ring();
  ModelBundle bundle = train_bfm(cfg, data);
  TrainConfig frn_cfg = cfg;
  frn_cfg.iterations = 5;
  Stage2Trainer trainer(frn_cfg, data, bundle);
  for (int i = 0; i < 5; ++i) trainer.step();

  Checkpoint ck;
  ck.stage = 2;
  ck.iteration = trainer.iteration();
  ck.config = frn_cfg;
  ck.bundle = bundle;
  ck.opt = {trainer.opt_state()};
  ck.rng_state = trainer.rng().serialize();
  const std::string path = tmp_path("bfm_test_stage2.bfmc");
  save_checkpoint(ck, path);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.stage == 2);
  CHECK(back.bundle.has_frn());
  CHECK(back.bundle.frn.flat == bundle.frn.flat);
  std::remove(path.c_str());
}
