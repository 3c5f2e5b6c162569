// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/train.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "danet/adam.h"
#include "danet/adanet.h"
#include "danet/masks.h"
#include "danet/random.h"

namespace danet::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int num_anchors_of(const inference::ModelConfig& m) {
  return m.type == inference::ModelType::kAdanet ? m.num_anchors : 0;
}

attractor::DanetOptions loss_options(const inference::ModelConfig& m) {
  attractor::DanetOptions o;
  o.keep_fraction = m.keep_fraction;
  o.nonlinearity = m.nonlinearity;
  return o;
}

attractor::LossAndGrad loss_and_grad(const nn::ParamStore& params,
                                     const attractor::TrainExample& ex,
                                     const inference::ModelConfig& m) {
  if (m.type == inference::ModelType::kAdanet)
    return adanet::adanet_loss_and_grad(params, ex, m.net, loss_options(m),
                                        m.slots);
  return attractor::danet_loss_and_grad(params, ex, m.net, loss_options(m));
}

// (start, length) of every training chunk of an utterance.
std::vector<std::pair<int, int>> chunk_spans(int frames, int chunk_frames) {
  std::vector<std::pair<int, int>> spans;
  if (frames <= chunk_frames) {
    spans.emplace_back(0, frames);
    return spans;
  }
  for (int s = 0; s + chunk_frames <= frames; s += chunk_frames)
    spans.emplace_back(s, chunk_frames);
  return spans;
}

std::vector<PreparedUtterance> prepare_all(
    const std::vector<data::Utterance>& set,
    const inference::ModelConfig& model) {
  std::vector<PreparedUtterance> out;
  out.reserve(set.size());
  for (const auto& u : set) out.push_back(prepare(u, model));
  return out;
}

double validation_loss(const nn::ParamStore& params,
                       const std::vector<PreparedUtterance>& valid,
                       const inference::ModelConfig& model) {
  double total = 0.0;
  int counted = 0;
  for (const auto& u : valid) {
    try {
      total += evaluate_loss(params, u.example, model);
      ++counted;
    } catch (const attractor::EmptySourceError&) {
    }
  }
  if (counted == 0) throw std::runtime_error("no usable validation utterance");
  return total / counted;
}

void accumulate(nn::Gradients& sum, const nn::Gradients& g) {
  for (const auto& [name, m] : g) {
    auto it = sum.find(name);
    if (it == sum.end())
      sum.emplace(name, m);
    else
      it->second += m;
  }
}

io::Checkpoint best_checkpoint(const io::Checkpoint& c) {
  io::Checkpoint b = c;
  if (c.best_params) b.params = *c.best_params;
  b.best_params.reset();
  return b;
}

}  // namespace

EpochCaps default_epoch_caps(inference::ModelType type) {
  return type == inference::ModelType::kDanet ? EpochCaps{25, 8}
                                              : EpochCaps{10, 4};
}

void TrainOptions::validate() const {
  model.net.validate();
  model.stft.validate();
  if (model.net.freq_bins != model.stft.num_bins())
    throw std::invalid_argument("freq_bins must equal window_len / 2 + 1");
  if (model.type == inference::ModelType::kAdanet &&
      (model.num_anchors < 1 || model.slots < 1 ||
       model.slots > model.num_anchors))
    throw std::invalid_argument("adanet needs 1 <= slots <= anchors");
  if (short_chunk < 1 || long_chunk < 1)
    throw std::invalid_argument("chunk lengths must be positive");
  if (!(short_lr > 0.0) || !(long_lr > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (switch_patience < 1 || stop_patience < 1 || lr_patience < 1)
    throw std::invalid_argument("patience values must be positive");
  if (max_short_epochs < 1 || max_long_epochs < 1 || max_epochs_this_run < 0)
    throw std::invalid_argument("invalid epoch limits");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
}

PreparedUtterance prepare(const data::Utterance& u,
                          const inference::ModelConfig& model) {
  if (u.sources.empty())
    throw std::invalid_argument(u.name + ": no reference sources");
  const dsp::ComplexSpectrogram spec = dsp::stft(u.mixture, model.stft);
  const dsp::MagnitudeSpectrogram mag = dsp::magnitude(spec);
  const Eigen::Index ft = mag.values.size();

  Matrix source_mags(static_cast<Eigen::Index>(u.sources.size()), ft);
  for (std::size_t i = 0; i < u.sources.size(); ++i) {
    const dsp::MagnitudeSpectrogram s =
        dsp::magnitude(dsp::stft(u.sources[i], model.stft));
    if (s.values.size() != ft)
      throw std::invalid_argument(u.name + ": source length differs");
    source_mags.row(static_cast<Eigen::Index>(i)) = s.flatten();
  }

  PreparedUtterance p;
  p.example.features = inference::input_features(mag, model.log_floor);
  p.example.mix_mag = mag.flatten();
  p.example.target = masks::wfm(source_mags);
  p.example.assignment = masks::ibm(source_mags);
  p.frames = static_cast<int>(mag.frames());
  p.num_sources = static_cast<int>(u.sources.size());
  return p;
}

attractor::TrainExample chunk(const PreparedUtterance& u, int start,
                              int length) {
  if (start < 0 || length < 1 || start + length > u.frames)
    throw std::out_of_range("chunk outside the utterance");
  const Eigen::Index f = u.example.features.rows();
  attractor::TrainExample c;
  c.features = u.example.features.middleCols(start, length);
  c.mix_mag = u.example.mix_mag.segment(start * f, length * f);
  c.target = u.example.target.middleCols(start * f, length * f);
  c.assignment = u.example.assignment.middleCols(start * f, length * f);
  return c;
}

double evaluate_loss(const nn::ParamStore& params,
                     const attractor::TrainExample& ex,
                     const inference::ModelConfig& m) {
  const Matrix v = nn::embed(params, ex.features, m.net);
  const attractor::ThresholdVector w =
      attractor::threshold_vector(ex.mix_mag, m.keep_fraction);
  if (m.type == inference::ModelType::kAdanet) {
    const adanet::SubsetSelection sel = adanet::select_attractor_set(
        params.at(nn::kAnchorsParam), v, w.w, m.slots);
    const masks::MaskSet est = attractor::estimate_masks(
        attractor::similarity_scores(sel.attractors, v), m.nonlinearity);
    return adanet::pit_loss(ex.mix_mag, adanet::pad_targets(ex.target, m.slots),
                            est)
        .loss;
  }
  const attractor::AttractorSet a =
      attractor::form_attractors(v, ex.assignment, w.w);
  const masks::MaskSet est = attractor::estimate_masks(
      attractor::similarity_scores(a, v), m.nonlinearity);
  return attractor::reconstruction_loss(ex.mix_mag, ex.target, est);
}

std::string loss_log_header() {
  return "epoch,phase,chunk_frames,lr,train_loss,valid_loss,skipped";
}

std::string format_record(const EpochRecord& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.epoch << ',' << r.phase << ','
     << r.chunk_frames << ',' << r.lr << ',';
  if (!std::isnan(r.train_loss)) os << r.train_loss;
  os << ',' << r.valid_loss << ',' << r.skipped;
  return os.str();
}

DivergenceError::DivergenceError(int epoch_, long step_)
    : std::runtime_error("training diverged: non-finite loss at epoch " +
                         std::to_string(epoch_) + ", step " +
                         std::to_string(step_)),
      epoch(epoch_),
      step(step_) {}

attractor::AttractorSet compute_fixed_attractors(
    const nn::ParamStore& params, const inference::ModelConfig& model,
    const std::vector<data::Utterance>& train_set) {
  std::vector<attractor::AttractorSet> sets;
  for (const auto& u : train_set) {
    if (static_cast<int>(u.sources.size()) != model.slots) continue;
    const PreparedUtterance p = prepare(u, model);
    const Matrix v = nn::embed(params, p.example.features, model.net);
    const attractor::ThresholdVector w =
        attractor::threshold_vector(p.example.mix_mag, model.keep_fraction);
    try {
      sets.push_back(attractor::form_attractors(v, p.example.assignment, w.w));
    } catch (const attractor::EmptySourceError&) {
    }
  }
  if (sets.empty())
    throw std::runtime_error("no training mixture has " +
                             std::to_string(model.slots) + " sources");
  return inference::fixed_attractors(sets);
}

TrainResult train(const TrainOptions& options,
                  const std::vector<data::Utterance>& train_set,
                  const std::vector<data::Utterance>& valid_set,
                  const std::filesystem::path& out_dir,
                  const std::optional<io::Checkpoint>& resume,
                  std::ostream* progress) {
  options.validate();
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  if (valid_set.empty()) throw std::invalid_argument("empty validation set");
  const inference::ModelConfig& model = options.model;
  if (resume && !(resume->model == model))
    throw std::invalid_argument("checkpoint model config differs from options");

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path log_path = out_dir / kLossLog;

  const std::vector<PreparedUtterance> train_data =
      prepare_all(train_set, model);
  const std::vector<PreparedUtterance> valid_data =
      prepare_all(valid_set, model);
  for (const auto& u : train_data)
    if (model.type == inference::ModelType::kAdanet &&
        u.num_sources > model.slots)
      throw std::invalid_argument("training mixture has more sources than slots");

  TrainResult result;
  io::Checkpoint& ck = result.checkpoint;
  std::ofstream log;
  if (resume) {
    ck = *resume;
    log.open(log_path, std::ios::app);
  } else {
    ck.model = model;
    ck.params = nn::init_params(model.net, derive_seed(options.seed, "init"),
                                num_anchors_of(model));
    ck.adam.lr = options.short_lr;
    log.open(log_path, std::ios::trunc);
    log << loss_log_header() << '\n';
  }
  if (!log) throw std::runtime_error("cannot write " + log_path.string());

  auto write_row = [&](const EpochRecord& r) {
    result.log.push_back(r);
    log << format_record(r) << '\n';
    log.flush();
    if (progress) *progress << format_record(r) << std::endl;
  };

  io::TrainingState& st = ck.training;
  if (!resume) {
    st.best_valid_loss = validation_loss(ck.params, valid_data, model);
    ck.best_params = ck.params;
    write_row(EpochRecord{0, 0, options.short_chunk, ck.adam.lr, kNaN,
               st.best_valid_loss, 0});
    io::checkpoint_save(ck, out_dir / kLastCheckpoint);
    io::checkpoint_save(best_checkpoint(ck), out_dir / kBestCheckpoint);
  }

  int epochs_run = 0;
  while (!st.finished) {
    if (options.max_epochs_this_run > 0 &&
        epochs_run >= options.max_epochs_this_run)
      break;
    const int chunk_frames =
        st.phase == 0 ? options.short_chunk : options.long_chunk;
    const int epoch = st.epoch + 1;

    std::vector<std::pair<std::size_t, std::pair<int, int>>> chunks;
    for (std::size_t i = 0; i < train_data.size(); ++i)
      for (const auto& span : chunk_spans(train_data[i].frames, chunk_frames))
        chunks.emplace_back(i, span);
    Rng rng(derive_seed(derive_seed(options.seed, "shuffle"),
                        static_cast<std::uint64_t>(epoch)));
    shuffle(chunks, rng);

    double loss_sum = 0.0;
    int used = 0;
    int skipped = 0;
    for (std::size_t b = 0; b < chunks.size();
         b += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end =
          std::min(chunks.size(), b + static_cast<std::size_t>(options.batch_size));
      nn::Gradients grads;
      int in_batch = 0;
      for (std::size_t j = b; j < end; ++j) {
        const auto& [utt, span] = chunks[j];
        const attractor::TrainExample ex =
            chunk(train_data[utt], span.first, span.second);
        attractor::LossAndGrad lg;
        try {
          lg = loss_and_grad(ck.params, ex, model);
        } catch (const attractor::EmptySourceError&) {
          ++skipped;
          continue;
        }
        if (!std::isfinite(lg.loss)) {
          const long step = static_cast<long>(ck.adam.step) + 1;
          std::ofstream(out_dir / "diverged.txt")
              << "epoch " << epoch << " step " << step << " chunk " << j
              << " loss " << lg.loss << '\n';
          throw DivergenceError(epoch, step);
        }
        loss_sum += lg.loss;
        ++used;
        ++in_batch;
        accumulate(grads, lg.grads);
      }
      if (in_batch == 0) continue;
      for (auto& [name, g] : grads) g /= static_cast<double>(in_batch);
      nn::adam_step(ck.params, grads, ck.adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = st.phase;
    rec.chunk_frames = chunk_frames;
    rec.lr = ck.adam.lr;
    rec.train_loss = used > 0 ? loss_sum / used : kNaN;
    rec.valid_loss = validation_loss(ck.params, valid_data, model);
    rec.skipped = skipped;

    st.epoch = epoch;
    ++st.phase_epochs;
    if (rec.valid_loss < st.best_valid_loss) {
      st.best_valid_loss = rec.valid_loss;
      ck.best_params = ck.params;
      st.epochs_since_best = 0;
      st.lr_counter = 0;
    } else {
      ++st.epochs_since_best;
      ++st.lr_counter;
    }
    st.lr_counter = nn::lr_schedule(ck.adam, st.lr_counter, options.lr_patience);

    if (st.phase == 0 && (st.epochs_since_best >= options.switch_patience ||
                          st.phase_epochs >= options.max_short_epochs)) {
      st.phase = 1;
      st.phase_epochs = 0;
      st.epochs_since_best = 0;
      st.lr_counter = 0;
      ck.params = *ck.best_params;
      ck.adam = nn::AdamState{};
      ck.adam.lr = options.long_lr;
    } else if (st.phase == 1 &&
               (st.epochs_since_best >= options.stop_patience ||
                st.phase_epochs >= options.max_long_epochs)) {
      st.finished = true;
    }
    write_row(rec);
    ++epochs_run;

    if (st.finished)
      ck.fixed_attractors =
          compute_fixed_attractors(*ck.best_params, model, train_set);
    io::checkpoint_save(ck, out_dir / kLastCheckpoint);
    if (st.epochs_since_best == 0 || st.finished)
      io::checkpoint_save(best_checkpoint(ck), out_dir / kBestCheckpoint);
  }
  return result;
}

}  // namespace danet::train
