// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Model checkpoints.
//
// Layout (all integers little-endian):
//   8 bytes   magic "DANETCKP"
//   u32       format version
//   u64       header length in bytes
//   header    UTF-8 JSON: model config, training state, Adam scalars and
//             an array manifest of {name, shape, offset}
//   arrays    raw little-endian IEEE-754 float64 values, column-major,
//             at the manifest offsets (relative to the start of this
//             section)

#ifndef DANET_CHECKPOINT_H_
#define DANET_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "danet/adam.h"
#include "danet/inference.h"

namespace danet::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingState {
  int epoch = 0;           // completed epochs
  int phase = 0;           // 0 short chunks, 1 long chunks
  int phase_epochs = 0;    // completed epochs in the current phase
  int epochs_since_best = 0;
  int lr_counter = 0;      // epochs since best, reset on every lr halving
  double best_valid_loss = std::numeric_limits<double>::infinity();
  bool finished = false;

  bool operator==(const TrainingState&) const = default;
};

struct Checkpoint {
  inference::ModelConfig model;
  nn::ParamStore params;
  nn::AdamState adam;
  TrainingState training;
  std::optional<nn::ParamStore> best_params;
  std::optional<attractor::AttractorSet> fixed_attractors;

  inference::Model to_model() const;  // best parameters when present
};

std::vector<std::uint8_t> checkpoint_encode(const Checkpoint& c);
Checkpoint checkpoint_decode(const std::vector<std::uint8_t>& bytes);

void checkpoint_save(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace danet::io

#endif  // DANET_CHECKPOINT_H_
