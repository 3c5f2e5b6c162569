// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "danet/checkpoint.h"
#include "danet/data.h"
#include "danet/wav.h"
#include "doctest.h"
#include "test_util.h"

namespace danet {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

dsp::Waveform random_wave(Rng& rng, std::size_t n, double amp) {
  dsp::Waveform w;
  w.samples.resize(n);
  for (double& v : w.samples) v = uniform(rng, -amp, amp);
  return w;
}

TEST_CASE("wav round trip") {
  Rng rng(121);
  const dsp::Waveform w = random_wave(rng, 1000, 0.99);
  const dsp::Waveform back = io::wav_decode(io::wav_encode(w));
  REQUIRE(back.size() == w.size());
  CHECK(back.sample_rate == 8000);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0 / 32768);

  const fs::path dir = testing::temp_dir("wav");
  io::wav_write(w, dir / "a.wav");
  CHECK(io::wav_read(dir / "a.wav").samples == back.samples);
  fs::remove_all(dir);
}

TEST_CASE("wav quantization boundaries") {
  CHECK(io::quantize(1.0) == 32767);
  CHECK(io::quantize(-1.0) == -32768);
  CHECK(io::quantize(5.0) == 32767);
  CHECK(io::quantize(-5.0) == -32768);
  CHECK(io::quantize(0.0) == 0);
  CHECK(io::dequantize(16384) == 0.5);

  dsp::Waveform loud;
  loud.samples = {1.5, -2.0, 0.5};
  std::size_t clipped = 0;
  io::wav_encode(loud, &clipped);
  CHECK(clipped == 2);

  dsp::Waveform zero;
  zero.samples.assign(50, 0.0);
  const auto bytes = io::wav_encode(zero);
  CHECK(bytes.size() == 44 + 100);
  for (std::size_t i = 44; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("wav validation") {
  dsp::Waveform w;
  w.samples.assign(20, 0.1);
  auto bytes = io::wav_encode(w);

  auto stereo = bytes;
  stereo[22] = 2;  // channel count in the canonical fmt chunk
  CHECK_THROWS_WITH(io::wav_decode(stereo), doctest::Contains("mono required"));

  auto truncated = bytes;
  truncated.resize(truncated.size() - 4);
  CHECK_THROWS_WITH(io::wav_decode(truncated),
                    doctest::Contains("payload shorter than header claims"));

  auto garbage = bytes;
  garbage[0] = 'X';
  CHECK_THROWS(io::wav_decode(garbage));

  dsp::Waveform fast = w;
  fast.sample_rate = 16000;
  CHECK_THROWS(io::wav_encode(fast));
  CHECK_THROWS_WITH(io::wav_read("/nonexistent/x.wav"),
                    doctest::Contains("/nonexistent/x.wav"));
}

TEST_CASE("synth source") {
  data::SourceSpec tone;
  tone.f0 = 250.0;
  tone.n_harmonics = 1;
  tone.am_rate = 0.0;
  tone.duration = 1.0;
  const dsp::Waveform w = data::synth_source(tone);
  CHECK(w.size() == 8000);
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  CHECK(std::abs(peak - 0.5) < 1e-9);

  const dsp::MagnitudeSpectrogram mag = dsp::magnitude(dsp::stft(w, {}));
  const Eigen::VectorXd energy = mag.values.array().square().rowwise().sum();
  Eigen::Index argmax = 0;
  energy.maxCoeff(&argmax);
  CHECK(argmax == std::lround(250.0 / 8000 * 256));

  data::SourceSpec rich;
  rich.seed = 9;
  CHECK(data::synth_source(rich).samples == data::synth_source(rich).samples);
  rich.seed = 10;
  CHECK(data::synth_source(rich).samples != data::synth_source(tone).samples);

  data::SourceSpec bad = rich;
  bad.f0 = 500.0;
  bad.n_harmonics = 8;
  CHECK_THROWS(data::synth_source(bad));
  bad = rich;
  bad.duration = 0.0;
  CHECK_THROWS(data::synth_source(bad));
}

TEST_CASE("mix at snr") {
  Rng rng(122);
  const dsp::Waveform a = random_wave(rng, 2000, 1.0);
  const dsp::Waveform b = a;
  const auto [mix0, s0] = data::mix_at_snr(a, b, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(s0.samples[i] == doctest::Approx(b.samples[i]));

  const auto [mix6, s6] = data::mix_at_snr(a, b, 10 * std::log10(4.0));
  CHECK(s6.samples[7] == doctest::Approx(0.5 * b.samples[7]));

  auto power = [](const dsp::Waveform& w) {
    double p = 0.0;
    for (double v : w.samples) p += v * v;
    return p;
  };
  for (int trial = 0; trial < 20; ++trial) {
    const dsp::Waveform x = random_wave(rng, 500, 1.0);
    const dsp::Waveform y = random_wave(rng, 500, uniform(rng, 0.1, 2));
    const double snr = uniform(rng, 0, 5);
    const auto [mix, ys] = data::mix_at_snr(x, y, snr);
    CHECK(std::abs(10 * std::log10(power(x) / power(ys)) - snr) < 1e-9);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(mix.samples[i] == x.samples[i] + ys.samples[i]);
  }
  dsp::Waveform silent;
  silent.samples.assign(2000, 0.0);
  CHECK_THROWS(data::mix_at_snr(a, silent, 0.0));
  dsp::Waveform shorter = a;
  shorter.samples.pop_back();
  CHECK_THROWS(data::mix_at_snr(a, shorter, 0.0));
}

TEST_CASE("manifest respects the f0 spacing rule") {
  for (int speakers : {1, 2, 3}) {
    const data::DatasetManifest m = data::build_manifest("t", 50, speakers, 0.5, 5);
    CHECK(m.mixtures.size() == 50);
    for (const auto& mix : m.mixtures) {
      REQUIRE(mix.sources.size() == static_cast<std::size_t>(speakers));
      CHECK((mix.snr_db >= 0.0 && mix.snr_db <= 5.0));
      for (std::size_t i = 0; i < mix.sources.size(); ++i) {
        const auto& s = mix.sources[i];
        CHECK((s.f0 >= 100.0 && s.f0 <= 400.0));
        CHECK(s.f0 * s.n_harmonics < 4000.0);
        for (std::size_t j = 0; j < i; ++j)
          CHECK(std::max(s.f0, mix.sources[j].f0) /
                    std::min(s.f0, mix.sources[j].f0) >= 1.25);
      }
    }
  }
  CHECK_THROWS(data::build_manifest("t", 1, 4, 1.0, 0));
}

TEST_CASE("dataset generation") {
  const fs::path dir = testing::temp_dir("gen");
  const data::DatasetManifest m = data::build_manifest("test", 10, 2, 0.5, 7);
  const auto rows = data::generate_dataset(m, dir);
  CHECK(rows.size() == 10);
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".wav") ++wavs;
  CHECK(wavs == 30);
  CHECK(data::read_index(dir / data::kIndexFile).size() == 10);

  std::vector<std::vector<std::uint8_t>> first;
  for (const auto& e : fs::directory_iterator(dir)) first.push_back(read_bytes(e.path()));
  data::generate_dataset(m, dir);
  std::vector<std::vector<std::uint8_t>> second;
  for (const auto& e : fs::directory_iterator(dir)) second.push_back(read_bytes(e.path()));
  CHECK(first == second);

  for (const auto& u : data::load_split(dir / data::kIndexFile)) {
    REQUIRE(u.sources.size() == 2);
    for (std::size_t i = 0; i < u.mixture.size(); ++i) {
      const double sum = u.sources[0].samples[i] + u.sources[1].samples[i];
      CHECK(std::abs(u.mixture.samples[i] - sum) <= 1.0 / 32768 + 1e-15);
    }
  }
  fs::remove_all(dir);
}

io::Checkpoint sample_checkpoint() {
  io::Checkpoint c;
  c.model.type = inference::ModelType::kAdanet;
  c.model.net.freq_bins = c.model.stft.num_bins();
  c.model.net.hidden_sizes = {4};
  c.model.net.embed_dim = 3;
  c.model.num_anchors = 4;
  c.params = nn::init_params(c.model.net, 5, 4);
  c.adam = nn::AdamState{};
  c.training.epoch = 3;
  c.training.best_valid_loss = 1.5;
  c.best_params = c.params;
  c.fixed_attractors = nn::Matrix::Identity(2, 3);
  return c;
}

TEST_CASE("checkpoint save load save is byte identical") {
  const fs::path dir = testing::temp_dir("ckpt");
  const io::Checkpoint c = sample_checkpoint();
  io::checkpoint_save(c, dir / "a.ckpt");
  const io::Checkpoint back = io::checkpoint_load(dir / "a.ckpt");
  io::checkpoint_save(back, dir / "b.ckpt");
  CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));
  CHECK(back.model == c.model);
  CHECK(back.training == c.training);
  CHECK(back.params.at(nn::kAnchorsParam) == c.params.at(nn::kAnchorsParam));
  CHECK(*back.fixed_attractors == *c.fixed_attractors);
  CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));

  io::Checkpoint fresh = c;
  fresh.training.best_valid_loss = std::numeric_limits<double>::infinity();
  fresh.best_params.reset();
  CHECK(std::isinf(io::checkpoint_decode(io::checkpoint_encode(fresh))
                       .training.best_valid_loss));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint tamper detection") {
  const auto bytes = io::checkpoint_encode(sample_checkpoint());
  const std::string text(bytes.begin(), bytes.end());

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS(io::checkpoint_decode(bad_magic));

  // Change a shape field in the JSON header without touching its length.
  const std::size_t at = text.find("\"shape\":[4,3]");
  REQUIRE(at != std::string::npos);
  auto bad_shape = bytes;
  bad_shape[at + 9] = '5';
  CHECK_THROWS(io::checkpoint_decode(bad_shape));

  auto truncated = bytes;
  truncated.resize(truncated.size() - 8);
  CHECK_THROWS(io::checkpoint_decode(truncated));
  CHECK_THROWS_WITH(io::checkpoint_load("/nonexistent.ckpt"),
                    doctest::Contains("/nonexistent.ckpt"));
}

}  // namespace
}  // namespace danet
