// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/cli.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "danet/checkpoint.h"
#include "danet/masks.h"
#include "danet/train.h"
#include "danet/wav.h"

namespace danet::cli {

namespace fs = std::filesystem;

namespace {

// Bad settings found after parsing; reported as a usage error.
class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool out_required,
                const std::string& out_help) {
  // Read by expand_config before parsing; registered for --help and so
  // the flag itself parses.
  sub->add_option("--config", "flat key=value settings file; flags win");
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  CLI::Option* out = sub->add_option("--out", c.out, out_help);
  if (out_required) out->required();
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void write_sources(const std::vector<dsp::Waveform>& sources,
                   const fs::path& dir, const std::string& stem,
                   std::ostream& out, std::ostream& err) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const fs::path p = dir / (stem + "_src" + std::to_string(i) + ".wav");
    const std::size_t clipped = io::wav_write(sources[i], p);
    if (clipped > 0)
      err << "warning: " << clipped << " samples clipped in " << p.string()
          << '\n';
    out << p.string() << '\n';
  }
}

inference::Strategy make_strategy(const std::string& name,
                                  const inference::Model& model,
                                  std::uint64_t seed,
                                  const std::string& centering) {
  if (name == "kmeans")
    return inference::KMeansStrategy{
        seed, centering == "auto"
                  ? inference::default_kmeans_centering(model.config.type)
                  : centering == "frequency"};
  if (name == "fixed") {
    if (!model.fixed_attractors)
      throw std::runtime_error("checkpoint has no fixed-attractor table");
    return inference::FixedStrategy{*model.fixed_attractors};
  }
  return inference::AnchoredStrategy{};
}

const std::vector<std::string> kStrategies{"kmeans", "fixed", "anchored"};

void add_centering(CLI::App* sub, std::string& centering) {
  sub->add_option("--kmeans-centering", centering,
                  "remove the per-frequency mean before k-means "
                  "[auto: danet only]")
      ->check(CLI::IsMember({"auto", "frequency", "none"}))
      ->capture_default_str();
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  Common common;
  int mixtures = -1;
  std::string split = "test";
  int speakers = 2;
  double duration = 2.0;
  int train_count = 500;
  int valid_count = 100;
  int test_count = 100;
};

void setup_gen(CLI::App& app, GenArgs& a) {
  CLI::App* sub = app.add_subcommand("gen", "generate a synthetic corpus");
  add_common(sub, a.common, true, "output directory");
  sub->add_option("--mixtures", a.mixtures,
                  "write one split with this many mixtures");
  sub->add_option("--split", a.split, "split name used with --mixtures")
      ->capture_default_str();
  sub->add_option("--speakers", a.speakers, "sources per mixture (1-3)")
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  sub->add_option("--duration", a.duration, "seconds per mixture")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--train-count", a.train_count)->capture_default_str();
  sub->add_option("--valid-count", a.valid_count)->capture_default_str();
  sub->add_option("--test-count", a.test_count)->capture_default_str();
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, int>> splits;
  if (a.mixtures >= 0) {
    if (a.split.empty()) throw UsageError("--split must not be empty");
    splits.emplace_back(a.split, a.mixtures);
  } else {
    splits = {{"train", a.train_count},
              {"valid", a.valid_count},
              {"test", a.test_count}};
  }
  for (const auto& [name, count] : splits)
    if (count < 0) throw UsageError("mixture counts must be >= 0");
  for (const auto& [name, count] : splits) {
    const data::DatasetManifest m = data::build_manifest(
        name, count, a.speakers, a.duration, a.common.seed);
    const fs::path dir = fs::path(a.common.out) / name;
    data::generate_dataset(m, dir);
    out << name << ": " << count << " mixtures, " << a.speakers
        << " sources, " << a.duration << " s -> "
        << (dir / data::kIndexFile).string() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string data;
  std::string model = "danet";
  int anchors = 6;
  int slots = 2;
  int embed_dim = 20;
  std::vector<int> hidden{128, 128};
  int context = 2;
  int window = 256;
  int hop = 64;
  std::string nonlinearity;  // empty: default for the model type
  double keep = 0.9;
  double log_floor = 1e-8;
  train::TrainOptions opts;
  std::optional<int> max_short_epochs;  // unset: default for the model type
  std::optional<int> max_long_epochs;
  bool resume = false;
  bool quiet = false;
};

void setup_train(CLI::App& app, TrainArgs& a) {
  CLI::App* sub = app.add_subcommand("train", "train a DANet or ADANet model");
  add_common(sub, a.common, true, "checkpoint and log directory");
  sub->add_option("--data", a.data,
                  "corpus directory holding train/ and valid/ splits")
      ->required();
  sub->add_option("--model", a.model)
      ->check(CLI::IsMember({"danet", "adanet"}))
      ->capture_default_str();
  sub->add_option("--anchors", a.anchors, "anchor count (adanet)")
      ->check(CLI::Range(1, 16))
      ->capture_default_str();
  sub->add_option("--slots", a.slots, "output count (adanet, fixed table)")
      ->check(CLI::Range(1, 8))
      ->capture_default_str();
  sub->add_option("--embed-dim", a.embed_dim)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--hidden", a.hidden, "hidden layer sizes")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--context", a.context, "frames of context per side")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--window", a.window, "STFT window length")
      ->capture_default_str();
  sub->add_option("--hop", a.hop, "STFT hop")->capture_default_str();
  sub->add_option("--nonlinearity", a.nonlinearity,
                  "mask nonlinearity [sigmoid for danet, softmax for adanet]")
      ->check(CLI::IsMember({"softmax", "sigmoid"}));
  sub->add_option("--keep", a.keep, "fraction of bins kept by the threshold")
      ->check(CLI::Bound(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--log-floor", a.log_floor)->capture_default_str();
  sub->add_option("--short-chunk", a.opts.short_chunk)->capture_default_str();
  sub->add_option("--long-chunk", a.opts.long_chunk)->capture_default_str();
  sub->add_option("--lr", a.opts.short_lr, "learning rate, short chunks")
      ->capture_default_str();
  sub->add_option("--long-lr", a.opts.long_lr, "learning rate, long chunks")
      ->capture_default_str();
  sub->add_option("--switch-patience", a.opts.switch_patience)
      ->capture_default_str();
  sub->add_option("--stop-patience", a.opts.stop_patience)
      ->capture_default_str();
  sub->add_option("--lr-patience", a.opts.lr_patience)->capture_default_str();
  sub->add_option("--max-short-epochs", a.max_short_epochs,
                  "epoch cap, short chunks [25 for danet, 10 for adanet]");
  sub->add_option("--max-long-epochs", a.max_long_epochs,
                  "epoch cap, long chunks [8 for danet, 4 for adanet]");
  sub->add_option("--batch-size", a.opts.batch_size)->capture_default_str();
  sub->add_option("--max-epochs", a.opts.max_epochs_this_run,
                  "stop this run after N epochs (0 = no limit)")
      ->capture_default_str();
  sub->add_flag("--resume", a.resume, "continue from <out>/last.ckpt");
  sub->add_flag("--quiet", a.quiet, "no per-epoch progress");
}

inference::ModelConfig model_config(const TrainArgs& a) {
  inference::ModelConfig m;
  m.type = inference::parse_model_type(a.model);
  m.stft.window_len = a.window;
  m.stft.hop = a.hop;
  m.net.freq_bins = m.stft.num_bins();
  m.net.context = a.context;
  m.net.hidden_sizes = a.hidden;
  m.net.embed_dim = a.embed_dim;
  m.num_anchors = m.type == inference::ModelType::kAdanet ? a.anchors : 0;
  m.slots = a.slots;
  m.nonlinearity = a.nonlinearity.empty()
                       ? inference::default_nonlinearity(m.type)
                       : attractor::parse_nonlinearity(a.nonlinearity);
  m.keep_fraction = a.keep;
  m.log_floor = a.log_floor;
  return m;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  train::TrainOptions opts = a.opts;
  opts.seed = a.common.seed;
  try {
    opts.model = model_config(a);
    const train::EpochCaps caps = train::default_epoch_caps(opts.model.type);
    opts.max_short_epochs = a.max_short_epochs.value_or(caps.max_short_epochs);
    opts.max_long_epochs = a.max_long_epochs.value_or(caps.max_long_epochs);
    opts.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path out_dir = a.common.out;
  std::optional<io::Checkpoint> resume;
  if (a.resume) resume = io::checkpoint_load(out_dir / train::kLastCheckpoint);
  if (resume && resume->training.finished) {
    out << "training already finished\n";
    return kExitOk;
  }
  const fs::path data_dir = a.data;
  const auto train_set = data::load_split(data_dir / "train" / data::kIndexFile);
  const auto valid_set = data::load_split(data_dir / "valid" / data::kIndexFile);
  const train::TrainResult r = train::train(
      opts, train_set, valid_set, out_dir, resume, a.quiet ? nullptr : &out);
  const io::TrainingState& st = r.checkpoint.training;
  out << (st.finished ? "finished" : "stopped") << " after epoch " << st.epoch
      << "; best validation loss " << st.best_valid_loss << '\n'
      << "checkpoint: " << (out_dir / train::kBestCheckpoint).string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- separate

struct SeparateArgs {
  Common common;
  std::string checkpoint;
  std::string input;
  std::string strategy = "kmeans";
  std::string centering = "auto";
  std::string speakers = "2";
};

void setup_separate(CLI::App& app, SeparateArgs& a) {
  CLI::App* sub = app.add_subcommand("separate", "separate one mixture");
  add_common(sub, a.common, true, "output directory");
  sub->add_option("--checkpoint", a.checkpoint)->required();
  sub->add_option("--input", a.input, "mixture WAV")->required();
  sub->add_option("--strategy", a.strategy)
      ->check(CLI::IsMember(kStrategies))
      ->capture_default_str();
  add_centering(sub, a.centering);
  sub->add_option("--speakers", a.speakers,
                  "source count, or 'auto' (anchored only)")
      ->capture_default_str();
}

int cmd_separate(const SeparateArgs& a, std::ostream& out, std::ostream& err) {
  const bool automatic = a.speakers == "auto";
  int count = 0;
  if (automatic) {
    if (a.strategy != "anchored")
      throw UsageError("--speakers auto needs --strategy anchored");
  } else {
    try {
      std::size_t used = 0;
      count = std::stoi(a.speakers, &used);
      if (used != a.speakers.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UsageError("--speakers must be a positive integer or 'auto'");
    }
    if (count < 1) throw UsageError("--speakers must be >= 1");
  }

  const inference::Model model = io::checkpoint_load(a.checkpoint).to_model();
  const dsp::Waveform mixture = io::wav_read(a.input);
  if (automatic) count = model.config.slots;
  std::vector<dsp::Waveform> sources = inference::separate(
      model, mixture, count,
      make_strategy(a.strategy, model, a.common.seed, a.centering));
  if (automatic) {
    const std::vector<int> active = adanet::detect_active_sources(sources);
    std::vector<dsp::Waveform> kept;
    for (int i : active) kept.push_back(std::move(sources[i]));
    err << "kept " << kept.size() << " of " << count << " outputs\n";
    sources = std::move(kept);
  }
  write_sources(sources, a.common.out, fs::path(a.input).stem().string(), out,
                err);
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  Common common;
  std::string index;
  std::string est_dir;
  std::string checkpoint;
  std::string strategy = "kmeans";
  std::string centering = "auto";
  std::string oracle;
};

void setup_evaluate(CLI::App& app, EvaluateArgs& a) {
  CLI::App* sub = app.add_subcommand(
      "evaluate", "score separated sources against the references");
  add_common(sub, a.common, true,
             "directory for scores.csv and summary.csv");
  sub->add_option("--index", a.index, "index.jsonl of the split")->required();
  CLI::Option* est = sub->add_option(
      "--est-dir", a.est_dir, "directory of <stem>_src<i>.wav estimates");
  CLI::Option* ck = sub->add_option("--checkpoint", a.checkpoint,
                                    "separate with this model");
  CLI::Option* oracle = sub->add_option("--oracle", a.oracle,
                                        "ideal-mask ceiling: wfm, irm or ibm")
                            ->check(CLI::IsMember({"wfm", "irm", "ibm"}));
  est->excludes(ck)->excludes(oracle);
  ck->excludes(oracle);
  sub->add_option("--strategy", a.strategy)
      ->check(CLI::IsMember(kStrategies))
      ->capture_default_str();
  add_centering(sub, a.centering);
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const int modes = !a.est_dir.empty() + !a.checkpoint.empty() +
                    !a.oracle.empty();
  if (modes != 1)
    throw UsageError("give exactly one of --est-dir, --checkpoint, --oracle");

  Estimator estimator;
  std::optional<inference::Model> model;
  if (!a.est_dir.empty()) {
    estimator = est_dir_estimator(a.est_dir);
  } else if (!a.checkpoint.empty()) {
    model = io::checkpoint_load(a.checkpoint).to_model();
    const inference::Strategy strategy =
        make_strategy(a.strategy, *model, a.common.seed, a.centering);
    estimator = [&model, strategy](const data::Utterance& u) {
      return inference::separate(*model, u.mixture,
                                 static_cast<int>(u.sources.size()), strategy);
    };
  } else {
    const masks::IdealMask kind = masks::parse_ideal_mask(a.oracle);
    estimator = [kind](const data::Utterance& u) {
      return inference::oracle_separate(kind, u.mixture, u.sources,
                                        dsp::StftConfig{});
    };
  }

  const Evaluation ev = evaluate_index(a.index, estimator);
  for (const std::string& m : ev.missing) err << "missing: " << m << '\n';

  const fs::path out_dir = a.common.out;
  fs::create_directories(out_dir);
  std::ofstream scores(out_dir / "scores.csv", std::ios::trunc);
  scores << "mixture,num_sources,si_snr,si_snri,snr,permutation\n";
  for (const MixtureScore& s : ev.scores) {
    std::string perm;
    for (int p : s.report.permutation)
      perm += (perm.empty() ? "" : " ") + std::to_string(p);
    scores << s.name << ',' << s.num_sources << ','
           << csv_number(s.report.mean_si_snr()) << ','
           << csv_number(s.report.mean_si_snri()) << ','
           << csv_number(metrics::mean(s.report.snr)) << ',' << perm << '\n';
  }
  std::ofstream summary(out_dir / "summary.csv", std::ios::trunc);
  summary << "statistic,si_snr,si_snri,snr\n";
  std::vector<double> snr_col;
  for (const MixtureScore& s : ev.scores)
    snr_col.push_back(metrics::mean(s.report.snr));
  const auto si = ev.column(&metrics::ScoreReport::mean_si_snr);
  const auto sii = ev.column(&metrics::ScoreReport::mean_si_snri);
  if (!ev.scores.empty()) {
    summary << "mean," << csv_number(metrics::mean(si)) << ','
            << csv_number(metrics::mean(sii)) << ','
            << csv_number(metrics::mean(snr_col)) << '\n';
    summary << "median," << csv_number(metrics::median(si)) << ','
            << csv_number(metrics::median(sii)) << ','
            << csv_number(metrics::median(snr_col)) << '\n';
  }
  if (!scores || !summary)
    throw std::runtime_error("cannot write results to " + out_dir.string());

  out << "evaluated " << ev.scores.size() << " mixtures";
  if (!ev.missing.empty()) out << " (" << ev.missing.size() << " missing files)";
  out << '\n';
  if (!ev.scores.empty())
    out << "SI-SNRi mean " << csv_number(metrics::mean(sii)) << " dB, median "
        << csv_number(metrics::median(sii)) << " dB\n";
  if (ev.scores.empty()) throw std::runtime_error("nothing could be evaluated");
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  Common common;
  std::string checkpoint;
  std::string input;
  std::vector<std::string> refs;
};

void setup_diagnose(CLI::App& app, DiagnoseArgs& a) {
  CLI::App* sub = app.add_subcommand(
      "diagnose", "export PCA coordinates of embeddings, attractors, anchors");
  add_common(sub, a.common, true, "output directory");
  sub->add_option("--checkpoint", a.checkpoint)->required();
  sub->add_option("--input", a.input, "mixture WAV")->required();
  sub->add_option("--refs", a.refs, "reference source WAVs")
      ->required()
      ->delimiter(',');
}

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
  const inference::Model model = io::checkpoint_load(a.checkpoint).to_model();
  const dsp::Waveform mixture = io::wav_read(a.input);
  std::vector<dsp::Waveform> refs;
  for (const std::string& r : a.refs) refs.push_back(io::wav_read(r));
  const Diagnostics d = diagnose(model, mixture, refs);

  const fs::path dir = a.common.out;
  fs::create_directories(dir);
  const fs::path path =
      dir / (fs::path(a.input).stem().string() + "_embeddings.csv");
  std::ofstream csv(path, std::ios::trunc);
  csv << "kind,index,pc1,pc2,pc3,label,kept\n";
  auto row = [&](const char* kind, Eigen::Index i, const Matrix& coords,
                 int label, int kept) {
    csv << kind << ',' << i;
    for (Eigen::Index r = 0; r < 3; ++r) csv << ',' << csv_number(coords(r, i));
    csv << ',' << label << ',' << kept << '\n';
  };
  for (Eigen::Index i = 0; i < d.bins.cols(); ++i)
    row("bin", i, d.bins, d.labels[static_cast<std::size_t>(i)],
        d.kept(i) > 0.5);
  for (Eigen::Index i = 0; i < d.attractors.cols(); ++i)
    row("attractor", i, d.attractors, static_cast<int>(i), 1);
  for (Eigen::Index i = 0; i < d.anchors.cols(); ++i)
    row("anchor", i, d.anchors, -1, 1);
  if (!csv) throw std::runtime_error("cannot write " + path.string());
  out << path.string() << '\n'
      << "inter-attractor distance " << csv_number(d.inter_attractor_distance)
      << ", intra-cluster distance " << csv_number(d.intra_cluster_distance)
      << '\n';
  return kExitOk;
}

}  // namespace

std::vector<double> Evaluation::column(
    double (metrics::ScoreReport::*f)() const) const {
  std::vector<double> v;
  v.reserve(scores.size());
  for (const MixtureScore& s : scores) v.push_back((s.report.*f)());
  return v;
}

double Evaluation::median_si_snri() const {
  return metrics::median(column(&metrics::ScoreReport::mean_si_snri));
}

double Evaluation::mean_si_snri() const {
  return metrics::mean(column(&metrics::ScoreReport::mean_si_snri));
}

Estimator est_dir_estimator(const fs::path& dir) {
  return [dir](const data::Utterance& u) {
    std::vector<dsp::Waveform> est;
    for (std::size_t i = 0; i < u.sources.size(); ++i) {
      const fs::path p = dir / (u.name + "_src" + std::to_string(i) + ".wav");
      if (!fs::exists(p)) throw MissingFileError(p);
      est.push_back(io::wav_read(p));
    }
    return est;
  };
}

Evaluation evaluate_index(const fs::path& index_path,
                          const Estimator& estimator) {
  const fs::path dir = index_path.parent_path();
  Evaluation ev;
  for (const data::IndexRow& row : data::read_index(index_path)) {
    data::Utterance u;
    u.name = fs::path(row.mixture_path).stem().string();
    bool complete = true;
    auto load = [&](const std::string& rel, dsp::Waveform& w) {
      const fs::path p = dir / rel;
      if (!fs::exists(p)) {
        ev.missing.push_back(p.string());
        complete = false;
        return;
      }
      w = io::wav_read(p);
    };
    load(row.mixture_path, u.mixture);
    u.sources.resize(row.source_paths.size());
    for (std::size_t i = 0; i < row.source_paths.size(); ++i)
      load(row.source_paths[i], u.sources[i]);
    if (!complete) continue;

    std::vector<dsp::Waveform> est;
    try {
      est = estimator(u);
    } catch (const MissingFileError& e) {
      ev.missing.push_back(e.path);
      continue;
    }
    MixtureScore s;
    s.name = u.name;
    s.num_sources = row.num_sources;
    s.report = metrics::score_with_permutation(est, u.sources, u.mixture);
    ev.scores.push_back(std::move(s));
  }
  return ev;
}

Diagnostics diagnose(const inference::Model& model,
                     const dsp::Waveform& mixture,
                     const std::vector<dsp::Waveform>& references) {
  const inference::ModelConfig& cfg = model.config;
  if (references.empty()) throw std::invalid_argument("no references given");
  if (cfg.net.embed_dim < 3)
    throw std::invalid_argument("diagnostics need an embedding dim >= 3");
  const dsp::MagnitudeSpectrogram mag =
      dsp::magnitude(dsp::stft(mixture, cfg.stft));
  const Matrix v = nn::embed(model.params,
                             inference::input_features(mag, cfg.log_floor),
                             cfg.net);
  Matrix ref_mags(static_cast<Eigen::Index>(references.size()), v.cols());
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (references[i].size() != mixture.size())
      throw std::invalid_argument("reference length differs from mixture");
    ref_mags.row(static_cast<Eigen::Index>(i)) =
        dsp::magnitude(dsp::stft(references[i], cfg.stft)).flatten();
  }
  const masks::SpeakerAssignment y = masks::ibm(ref_mags);
  const attractor::ThresholdVector w =
      attractor::threshold_vector(mag.flatten(), cfg.keep_fraction);
  const attractor::AttractorSet a = attractor::form_attractors(v, y, w.w);

  const inference::PcaResult pca = inference::pca_project(v, 3);
  Diagnostics d;
  d.bins = pca.projection;
  d.kept = w.w;
  d.labels.resize(static_cast<std::size_t>(v.cols()));
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index label = 0;
    y.col(j).maxCoeff(&label);
    d.labels[static_cast<std::size_t>(j)] = static_cast<int>(label);
  }
  d.attractors = pca.project(a.transpose());
  if (model.params.contains(nn::kAnchorsParam))
    d.anchors = pca.project(model.params.at(nn::kAnchorsParam).transpose());
  else
    d.anchors.resize(3, 0);

  double inter = 0.0;
  int pairs = 0;
  for (Eigen::Index i = 0; i < d.attractors.cols(); ++i)
    for (Eigen::Index j = i + 1; j < d.attractors.cols(); ++j) {
      inter += (d.attractors.col(i) - d.attractors.col(j)).norm();
      ++pairs;
    }
  d.inter_attractor_distance = pairs > 0 ? inter / pairs : 0.0;
  double intra = 0.0;
  int kept = 0;
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    if (w.w(j) < 0.5) continue;
    intra += (d.bins.col(j) -
              d.attractors.col(d.labels[static_cast<std::size_t>(j)]))
                 .norm();
    ++kept;
  }
  d.intra_cluster_distance = kept > 0 ? intra / kept : 0.0;
  return d;
}

bool given_on_command_line(const std::vector<std::string>& args,
                           std::size_t from, const std::string& flag) {
  for (std::size_t i = from; i < args.size(); ++i)
    if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
  return false;
}

// Splices the settings of a subcommand's --config file into the argument
// list right after the subcommand name, skipping keys already given as
// flags.
std::vector<std::string> expand_config(const CLI::App& app,
                                       std::vector<std::string> args) {
  std::size_t sub_at = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size() && sub == nullptr; ++i)
    for (const CLI::App* s : app.get_subcommands({}))
      if (s->get_name() == args[i]) {
        sub = s;
        sub_at = i;
      }
  if (sub == nullptr) return args;

  std::string path;
  for (std::size_t i = sub_at + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::FileError& e) {
    throw UsageError(e.what());
  }
  std::vector<std::string> extra;
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string key = item.fullname();
    const std::string flag = "--" + key;
    if (!item.parents.empty() || key == "config" ||
        sub->get_option_no_throw(flag) == nullptr)
      throw UsageError("unknown setting '" + key + "' in " + path);
    if (given_on_command_line(args, sub_at + 1, flag)) continue;
    if (item.inputs.size() == 1) {
      extra.push_back(flag + "=" + item.inputs.front());
    } else {
      extra.push_back(flag);
      extra.insert(extra.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_at) + 1,
              extra.begin(), extra.end());
  return args;
}

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Deep attractor network source separation", "danet"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenArgs gen;
  TrainArgs train_args;
  SeparateArgs sep;
  EvaluateArgs eval;
  DiagnoseArgs diag;
  setup_gen(app, gen);
  setup_train(app, train_args);
  setup_separate(app, sep);
  setup_evaluate(app, eval);
  setup_diagnose(app, diag);

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(app, std::move(args));
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "gen") return cmd_gen(gen, out);
    if (cmd == "train") return cmd_train(train_args, out);
    if (cmd == "separate") return cmd_separate(sep, out, err);
    if (cmd == "evaluate") return cmd_evaluate(eval, out, err);
    return cmd_diagnose(diag, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n"
        << app.get_subcommand(cmd)->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  std::vector<const char*> argv{"danet"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace danet::cli
