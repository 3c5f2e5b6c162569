// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/train.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "test_util.h"

namespace danet {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<data::Utterance> tiny_split(const std::string& name, int count,
                                        int speakers) {
  const data::DatasetManifest m =
      data::build_manifest(name, count, speakers, 0.3, 17);
  std::vector<data::Utterance> out;
  for (std::size_t i = 0; i < m.mixtures.size(); ++i) {
    const data::Mixture mix = data::render_mixture(m.mixtures[i]);
    out.push_back({name + std::to_string(i), mix.mixture, mix.sources});
  }
  return out;
}

train::TrainOptions tiny_options(inference::ModelType type) {
  train::TrainOptions o;
  o.model.type = type;
  o.model.stft.window_len = 64;
  o.model.stft.hop = 16;
  o.model.net.freq_bins = o.model.stft.num_bins();
  o.model.net.context = 1;
  o.model.net.hidden_sizes = {8};
  o.model.net.embed_dim = 4;
  if (type == inference::ModelType::kAdanet) {
    o.model.num_anchors = 3;
    o.model.slots = 2;
  }
  o.seed = 23;
  o.short_chunk = 40;
  o.long_chunk = 400;
  o.max_short_epochs = 2;
  o.max_long_epochs = 2;
  o.batch_size = 2;
  return o;
}

struct Corpus {
  std::vector<data::Utterance> train = tiny_split("train", 6, 2);
  std::vector<data::Utterance> valid = tiny_split("valid", 2, 2);
};

const Corpus& corpus() {
  static const Corpus c;
  return c;
}

TEST_CASE("identical seeds give identical loss logs") {
  for (auto type : {inference::ModelType::kDanet, inference::ModelType::kAdanet}) {
    const fs::path a = testing::temp_dir("train_a");
    const fs::path b = testing::temp_dir("train_b");
    const train::TrainOptions o = tiny_options(type);
    const auto ra = train::train(o, corpus().train, corpus().valid, a);
    const auto rb = train::train(o, corpus().train, corpus().valid, b);
    REQUIRE(ra.log.size() == rb.log.size());
    for (std::size_t i = 0; i < ra.log.size(); ++i)
      CHECK(train::format_record(ra.log[i]) == train::format_record(rb.log[i]));
    CHECK(slurp(a / train::kLossLog) == slurp(b / train::kLossLog));
    CHECK(slurp(a / train::kBestCheckpoint) == slurp(b / train::kBestCheckpoint));
    CHECK(ra.checkpoint.training.finished);

    // Rows: the untrained model, then both phases.
    REQUIRE(ra.log.size() == 5);
    CHECK(std::isnan(ra.log[0].train_loss));
    CHECK(ra.log[1].phase == 0);
    CHECK(ra.log[1].chunk_frames == 40);
    CHECK(ra.log[3].phase == 1);
    CHECK(ra.log[3].lr == o.long_lr);
    CHECK(ra.log.back().valid_loss < ra.log[0].valid_loss);

    const train::TrainOptions other = [&] {
      train::TrainOptions x = o;
      x.seed = 24;
      return x;
    }();
    const auto rc = train::train(other, corpus().train, corpus().valid,
                                 testing::temp_dir("train_c"));
    CHECK(rc.log[1].train_loss != ra.log[1].train_loss);
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(testing::temp_dir("train_c"));
  }
}

TEST_CASE("resumed training reproduces the uninterrupted run bitwise") {
  const train::TrainOptions o = tiny_options(inference::ModelType::kAdanet);
  const fs::path full = testing::temp_dir("train_full");
  const fs::path split = testing::temp_dir("train_split");
  train::train(o, corpus().train, corpus().valid, full);

  for (int stop_after : {1, 2, 1}) {
    train::TrainOptions part = o;
    part.max_epochs_this_run = stop_after;
    std::optional<io::Checkpoint> resume;
    if (fs::exists(split / train::kLastCheckpoint))
      resume = io::checkpoint_load(split / train::kLastCheckpoint);
    train::train(part, corpus().train, corpus().valid, split, resume);
  }
  CHECK(slurp(full / train::kLossLog) == slurp(split / train::kLossLog));
  CHECK(slurp(full / train::kLastCheckpoint) ==
        slurp(split / train::kLastCheckpoint));
  CHECK(slurp(full / train::kBestCheckpoint) ==
        slurp(split / train::kBestCheckpoint));

  train::TrainOptions changed = o;
  changed.model.net.embed_dim = 5;
  CHECK_THROWS(train::train(changed, corpus().train, corpus().valid, split,
                            io::checkpoint_load(split / train::kLastCheckpoint)));
  fs::remove_all(full);
  fs::remove_all(split);
}

TEST_CASE("fixed attractors are stored with the final danet model") {
  const fs::path dir = testing::temp_dir("train_fixed");
  const auto r = train::train(tiny_options(inference::ModelType::kDanet),
                              corpus().train, corpus().valid, dir);
  REQUIRE(r.checkpoint.fixed_attractors.has_value());
  CHECK(r.checkpoint.fixed_attractors->rows() == 2);
  CHECK(r.checkpoint.fixed_attractors->cols() == 4);
  const io::Checkpoint best = io::checkpoint_load(dir / train::kBestCheckpoint);
  CHECK(best.fixed_attractors.has_value());
  CHECK_FALSE(best.best_params.has_value());
  fs::remove_all(dir);
}

TEST_CASE("divergence is reported") {
  train::TrainOptions o = tiny_options(inference::ModelType::kDanet);
  o.short_lr = 1e300;
  const fs::path dir = testing::temp_dir("train_nan");
  CHECK_THROWS_AS(train::train(o, corpus().train, corpus().valid, dir),
                  train::DivergenceError);
  CHECK(fs::exists(dir / "diverged.txt"));
  fs::remove_all(dir);
}

TEST_CASE("loss log format") {
  CHECK(train::loss_log_header() ==
        "epoch,phase,chunk_frames,lr,train_loss,valid_loss,skipped");
  train::EpochRecord r;
  r.epoch = 0;
  r.chunk_frames = 100;
  r.lr = 1e-3;
  r.train_loss = std::nan("");
  r.valid_loss = 2.5;
  CHECK(train::format_record(r) == "0,0,100,0.001,,2.5,0");
}

TEST_CASE("option validation") {
  train::TrainOptions o = tiny_options(inference::ModelType::kDanet);
  CHECK_NOTHROW(o.validate());
  o.max_short_epochs = 0;
  CHECK_THROWS(o.validate());
  o = tiny_options(inference::ModelType::kDanet);
  o.batch_size = 0;
  CHECK_THROWS(o.validate());
}

}  // namespace
}  // namespace danet
