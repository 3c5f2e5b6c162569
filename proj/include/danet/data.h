// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Deterministic synthetic mixtures of harmonic "speakers".

#ifndef DANET_DATA_H_
#define DANET_DATA_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "danet/dsp.h"

namespace danet::data {

inline constexpr int kSampleRate = 8000;

struct SourceSpec {
  double f0 = 200.0;      // Hz
  int n_harmonics = 8;
  double am_rate = 3.0;   // Hz, 0 disables amplitude modulation
  double duration = 2.0;  // seconds
  std::uint64_t seed = 0;
};

struct MixtureSpec {
  std::vector<SourceSpec> sources;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::string split;
  std::vector<MixtureSpec> mixtures;
  std::uint64_t seed = 0;
  int sample_rate = kSampleRate;
};

// Sum of harmonics k*f0 with amplitude 1/k and seeded random phases, times
// a sinusoidal envelope at am_rate, peak-normalized to 0.5.
dsp::Waveform synth_source(const SourceSpec& spec,
                           int sample_rate = kSampleRate);

// Scales s2 so that 10 log10(P1 / P2') = snr_db. Returns (s1 + s2', s2').
std::pair<dsp::Waveform, dsp::Waveform> mix_at_snr(const dsp::Waveform& s1,
                                                   const dsp::Waveform& s2,
                                                   double snr_db);

struct Mixture {
  dsp::Waveform mixture;
  std::vector<dsp::Waveform> sources;  // already scaled; sum to mixture
};

// Synthesizes, scales every source after the first against the first,
// brings the peak under 0.9 and snaps the sources to the 16-bit grid so the
// mixture stays an exact sum after PCM storage.
Mixture render_mixture(const MixtureSpec& spec, int sample_rate = kSampleRate);

// `count` mixtures of `speakers` sources with f0 ratios >= 1.25 between any
// two sources and SNR uniform in [0, 5] dB.
DatasetManifest build_manifest(const std::string& split, int count,
                               int speakers, double duration,
                               std::uint64_t seed);

struct IndexRow {
  std::string mixture_path;               // relative to the index file
  std::vector<std::string> source_paths;  // relative to the index file
  int num_sources = 0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kIndexFile = "index.jsonl";

// Writes mix_NNNNN.wav, mix_NNNNN_sK.wav and index.jsonl under out_dir.
std::vector<IndexRow> generate_dataset(const DatasetManifest& manifest,
                                       const std::filesystem::path& out_dir);

std::vector<IndexRow> read_index(const std::filesystem::path& index_path);

struct Utterance {
  std::string name;  // mixture file stem
  dsp::Waveform mixture;
  std::vector<dsp::Waveform> sources;
};

// Reads every WAV named by an index file.
std::vector<Utterance> load_split(const std::filesystem::path& index_path);

}  // namespace danet::data

#endif  // DANET_DATA_H_
