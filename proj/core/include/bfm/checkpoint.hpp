#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bfm/models.hpp"
#include "bfm/nn.hpp"
#include "bfm/training.hpp"

namespace bfm {

// Self-describing training snapshot: "BFMC" magic, u16 version, u32-length
// JSON header (specs, config echo, iteration, RNG state, optimizer scalars,
// array manifest), then the declared little-endian f32 arrays (parameters and
// AdamW moments), trailing CRC32 over header + arrays. Loading a checkpoint
// reproduces parameters bit-exactly and resumes deterministically.
struct Checkpoint {
  int stage = 1;  // 1: velocity blocks + alignment; 2: + feature residual net
  std::int64_t iteration = 0;
  TrainConfig config;
  ModelBundle bundle;
  std::vector<OptState> opt;  // trainable-net order for the stage
  std::string rng_state;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bfm
