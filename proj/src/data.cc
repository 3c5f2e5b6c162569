// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

#include "danet/random.h"
#include "danet/wav.h"

namespace danet::data {

namespace fs = std::filesystem;

dsp::Waveform synth_source(const SourceSpec& spec, int sample_rate) {
  if (!(spec.f0 > 0.0)) throw std::invalid_argument("f0 must be > 0");
  if (spec.n_harmonics < 1)
    throw std::invalid_argument("need at least one harmonic");
  if (!(spec.f0 * spec.n_harmonics < sample_rate / 2.0))
    throw std::invalid_argument("harmonics exceed Nyquist: f0 * n_harmonics = " +
                                std::to_string(spec.f0 * spec.n_harmonics) +
                                " Hz");
  if (!(spec.duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (spec.am_rate < 0.0) throw std::invalid_argument("am_rate must be >= 0");

  Rng rng(spec.seed);
  std::vector<double> phases(static_cast<std::size_t>(spec.n_harmonics));
  for (double& p : phases) p = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double am_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  const auto n = static_cast<std::size_t>(std::llround(spec.duration * sample_rate));
  if (n == 0) throw std::invalid_argument("duration shorter than one sample");
  dsp::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double x = 0.0;
    for (int k = 1; k <= spec.n_harmonics; ++k)
      x += std::sin(two_pi * k * spec.f0 * t + phases[k - 1]) / k;
    const double env =
        spec.am_rate > 0.0
            ? 1.0 + 0.8 * std::sin(two_pi * spec.am_rate * t + am_phase)
            : 1.0;
    w.samples[i] = env * x;
  }
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : w.samples) v *= 0.5 / peak;
  return w;
}

std::pair<dsp::Waveform, dsp::Waveform> mix_at_snr(const dsp::Waveform& s1,
                                                   const dsp::Waveform& s2,
                                                   double snr_db) {
  if (s1.size() != s2.size())
    throw std::invalid_argument("sources must have equal length");
  const double p1 = dsp::power(s1.samples);
  const double p2 = dsp::power(s2.samples);
  if (!(p1 > 0.0) || !(p2 > 0.0))
    throw std::invalid_argument("zero-power source");
  const double gain = std::sqrt(p1 / (p2 * std::pow(10.0, snr_db / 10.0)));
  dsp::Waveform scaled = s2;
  for (double& v : scaled.samples) v *= gain;
  dsp::Waveform mix = s1;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.samples[i] += scaled.samples[i];
  return {std::move(mix), std::move(scaled)};
}

Mixture render_mixture(const MixtureSpec& spec, int sample_rate) {
  if (spec.sources.empty() || spec.sources.size() > 3)
    throw std::invalid_argument("mixtures need 1 to 3 sources");
  Mixture m;
  m.sources.push_back(synth_source(spec.sources[0], sample_rate));
  for (std::size_t i = 1; i < spec.sources.size(); ++i) {
    if (spec.sources[i].duration != spec.sources[0].duration)
      throw std::invalid_argument("all sources must have equal duration");
    dsp::Waveform s = synth_source(spec.sources[i], sample_rate);
    m.sources.push_back(mix_at_snr(m.sources[0], s, spec.snr_db).second);
  }
  const std::size_t n = m.sources[0].size();
  std::vector<double> sum(n, 0.0);
  double peak = 0.0;
  for (const auto& s : m.sources)
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] += s.samples[i];
      peak = std::max(peak, std::abs(s.samples[i]));
    }
  for (double v : sum) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.9 ? 0.9 / peak : 1.0;

  m.mixture.sample_rate = sample_rate;
  m.mixture.samples.assign(n, 0.0);
  for (auto& s : m.sources) {
    for (std::size_t i = 0; i < n; ++i) {
      s.samples[i] = io::dequantize(io::quantize(s.samples[i] * gain));
      m.mixture.samples[i] += s.samples[i];
    }
  }
  return m;
}

DatasetManifest build_manifest(const std::string& split, int count,
                               int speakers, double duration,
                               std::uint64_t seed) {
  if (speakers < 1 || speakers > 3)
    throw std::invalid_argument("speakers must be 1, 2 or 3");
  if (count < 0) throw std::invalid_argument("mixture count must be >= 0");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  constexpr double kMinF0 = 100.0;
  constexpr double kMaxF0 = 400.0;
  constexpr double kMinRatio = 1.25;
  constexpr int kMaxHarmonics = 16;

  DatasetManifest manifest;
  manifest.split = split;
  manifest.seed = seed;
  const std::uint64_t split_seed = derive_seed(seed, split);
  for (int m = 0; m < count; ++m) {
    MixtureSpec mix;
    mix.seed = derive_seed(split_seed, static_cast<std::uint64_t>(m));
    Rng rng(mix.seed);
    std::vector<double> f0s;
    while (static_cast<int>(f0s.size()) < speakers) {
      const double f0 = kMinF0 * std::pow(kMaxF0 / kMinF0, uniform01(rng));
      const bool distinct = std::all_of(f0s.begin(), f0s.end(), [&](double o) {
        return std::max(f0, o) / std::min(f0, o) >= kMinRatio;
      });
      if (distinct) f0s.push_back(f0);
    }
    for (int s = 0; s < speakers; ++s) {
      SourceSpec src;
      src.f0 = f0s[s];
      src.n_harmonics = std::min(
          kMaxHarmonics,
          static_cast<int>(std::floor((kSampleRate / 2.0 - 1.0) / src.f0)));
      src.am_rate = uniform(rng, 1.0, 6.0);
      src.duration = duration;
      src.seed = derive_seed(mix.seed, static_cast<std::uint64_t>(s + 1));
      mix.sources.push_back(src);
    }
    mix.snr_db = speakers > 1 ? uniform(rng, 0.0, 5.0) : 0.0;
    manifest.mixtures.push_back(std::move(mix));
  }
  return manifest;
}

namespace {

std::string stem_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mix_%05zu", index);
  return buf;
}

}  // namespace

std::vector<IndexRow> generate_dataset(const DatasetManifest& manifest,
                                       const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("cannot create " + out_dir.string() + ": " +
                             ec.message());
  std::vector<IndexRow> rows;
  for (std::size_t i = 0; i < manifest.mixtures.size(); ++i) {
    const MixtureSpec& spec = manifest.mixtures[i];
    const Mixture m = render_mixture(spec, manifest.sample_rate);
    IndexRow row;
    const std::string stem = stem_for(i);
    row.mixture_path = stem + ".wav";
    io::wav_write(m.mixture, out_dir / row.mixture_path);
    for (std::size_t s = 0; s < m.sources.size(); ++s) {
      row.source_paths.push_back(stem + "_s" + std::to_string(s) + ".wav");
      io::wav_write(m.sources[s], out_dir / row.source_paths.back());
    }
    row.num_sources = static_cast<int>(m.sources.size());
    row.snr_db = spec.snr_db;
    row.seed = spec.seed;
    rows.push_back(std::move(row));
  }
  const fs::path index_path = out_dir / kIndexFile;
  std::ofstream out(index_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + index_path.string());
  for (const IndexRow& row : rows) {
    nlohmann::json j;
    j["mixture_path"] = row.mixture_path;
    j["source_paths"] = row.source_paths;
    j["C"] = row.num_sources;
    j["snr_db"] = row.snr_db;
    j["seed"] = row.seed;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + index_path.string());
  return rows;
}

std::vector<IndexRow> read_index(const fs::path& index_path) {
  std::ifstream in(index_path);
  if (!in) throw std::runtime_error("cannot open index " + index_path.string());
  std::vector<IndexRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      IndexRow row;
      row.mixture_path = j.at("mixture_path").get<std::string>();
      row.source_paths = j.at("source_paths").get<std::vector<std::string>>();
      row.num_sources = j.at("C").get<int>();
      row.snr_db = j.at("snr_db").get<double>();
      row.seed = j.at("seed").get<std::uint64_t>();
      if (row.num_sources != static_cast<int>(row.source_paths.size()))
        throw std::runtime_error("C does not match source_paths");
      rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw std::runtime_error(index_path.string() + ":" +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<Utterance> load_split(const fs::path& index_path) {
  const fs::path dir = index_path.parent_path();
  std::vector<Utterance> out;
  for (const IndexRow& row : read_index(index_path)) {
    Utterance u;
    u.name = fs::path(row.mixture_path).stem().string();
    u.mixture = io::wav_read(dir / row.mixture_path);
    for (const auto& p : row.source_paths)
      u.sources.push_back(io::wav_read(dir / p));
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace danet::data
