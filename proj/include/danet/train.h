// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Curriculum training for DANet and ADANet models.
//
// Phase 0 trains on short non-overlapping chunks until the validation loss
// stops improving, then phase 1 restarts Adam at a lower learning rate on
// long chunks from the best parameters so far. Validation always uses whole
// utterances. Every epoch appends a row to the loss log and rewrites the
// checkpoints, so an interrupted run can be resumed bit-for-bit.

#ifndef DANET_TRAIN_H_
#define DANET_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "danet/attractor.h"
#include "danet/checkpoint.h"
#include "danet/data.h"
#include "danet/inference.h"

namespace danet::train {

using nn::Matrix;

struct TrainOptions {
  inference::ModelConfig model;
  std::uint64_t seed = 0;

  int short_chunk = 100;  // frames
  int long_chunk = 400;   // frames; whole utterance when shorter
  double short_lr = 1e-3;
  double long_lr = 1e-4;
  int switch_patience = 5;  // epochs without improvement ending phase 0
  int stop_patience = 10;   // epochs without improvement ending phase 1
  int lr_patience = 3;
  int max_short_epochs = 25;  // see default_epoch_caps
  int max_long_epochs = 8;
  int batch_size = 4;  // chunks per Adam step

  // Stop after this many epochs in this call (0 = no limit). The run can
  // be continued later from last.ckpt.
  int max_epochs_this_run = 0;

  void validate() const;
};

struct EpochCaps {
  int max_short_epochs = 0;
  int max_long_epochs = 0;
};

// Per-model defaults for the epoch caps above.
EpochCaps default_epoch_caps(inference::ModelType type);

// One prepared utterance or chunk, ready for the loss.
struct PreparedUtterance {
  attractor::TrainExample example;
  int frames = 0;
  int num_sources = 0;
};

PreparedUtterance prepare(const data::Utterance& u,
                          const inference::ModelConfig& model);

// Frames [start, start + length) of a prepared utterance.
attractor::TrainExample chunk(const PreparedUtterance& u, int start,
                              int length);

// Loss without gradients, as used for validation.
double evaluate_loss(const nn::ParamStore& params,
                     const attractor::TrainExample& example,
                     const inference::ModelConfig& model);

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained model
  int phase = 0;
  int chunk_frames = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean over chunks; NaN for epoch 0
  double valid_loss = 0.0;  // mean over utterances
  int skipped = 0;          // chunks with an empty source

  bool operator==(const EpochRecord&) const = default;
};

std::string loss_log_header();
std::string format_record(const EpochRecord& r);

// Raised when a training loss is not finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, long step);
  int epoch;
  long step;
};

inline constexpr const char* kLastCheckpoint = "last.ckpt";
inline constexpr const char* kBestCheckpoint = "best.ckpt";
inline constexpr const char* kLossLog = "loss.csv";

struct TrainResult {
  io::Checkpoint checkpoint;  // state after the last epoch run
  std::vector<EpochRecord> log;  // rows written by this call
};

// Trains from scratch, or continues `resume` when given. Writes last.ckpt,
// best.ckpt and loss.csv under out_dir (created if needed).
TrainResult train(const TrainOptions& options,
                  const std::vector<data::Utterance>& train_set,
                  const std::vector<data::Utterance>& valid_set,
                  const std::filesystem::path& out_dir,
                  const std::optional<io::Checkpoint>& resume = std::nullopt,
                  std::ostream* progress = nullptr);

// IBM-assignment attractors of every training mixture with `slots` sources,
// aligned and averaged.
attractor::AttractorSet compute_fixed_attractors(
    const nn::ParamStore& params, const inference::ModelConfig& model,
    const std::vector<data::Utterance>& train_set);

}  // namespace danet::train

#endif  // DANET_TRAIN_H_
