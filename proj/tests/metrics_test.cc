// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_util.h"

namespace danet {
namespace {

std::vector<double> add(const std::vector<double>& a,
                        const std::vector<double>& b, double scale = 1.0) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + scale * b[i];
  return out;
}

std::vector<double> random_signal(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = uniform(rng, -1, 1);
  return x;
}

dsp::Waveform wave(std::vector<double> x) {
  dsp::Waveform w;
  w.samples = std::move(x);
  return w;
}

// Projection oracle written from the definition with explicit loops.
double oracle_si_snr(std::vector<double> est, std::vector<double> ref) {
  const double me = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
  const double mr = std::accumulate(ref.begin(), ref.end(), 0.0) / ref.size();
  for (double& v : est) v -= me;
  for (double& v : ref) v -= mr;
  double dot = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    dot += est[i] * ref[i];
    rr += ref[i] * ref[i];
  }
  double tt = 0.0, ee = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = dot / rr * ref[i];
    tt += t * t;
    ee += (est[i] - t) * (est[i] - t);
  }
  return 10.0 * std::log10(tt / ee);
}

const std::vector<double> kRef = {1, -1, 1, -1};
const std::vector<double> kNoise = {1, 1, -1, -1};

TEST_CASE("orthogonal equal-power noise gives 0 dB") {
  CHECK(std::abs(metrics::si_snr(add(kRef, kNoise), kRef)) < 1e-9);
}

TEST_CASE("noise at 0.1x power gives 10 dB") {
  // |n|^2 = 0.4 against |s|^2 = 4.
  const double a = std::sqrt(0.1);
  CHECK(std::abs(metrics::si_snr(add(kRef, kNoise, a), kRef) - 10.0) < 1e-9);
}

TEST_CASE("scale invariance") {
  Rng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_signal(rng, 300);
    const auto e = add(s, random_signal(rng, 300), 0.5);
    const double base = metrics::si_snr(e, s);
    for (double alpha : {0.1, 10.0}) {
      std::vector<double> se = e, ss = s;
      for (double& v : se) v *= alpha;
      for (double& v : ss) v *= alpha;
      CHECK(std::abs(metrics::si_snr(se, s) - base) < 1e-9);
      CHECK(std::abs(metrics::si_snr(e, ss) - base) < 1e-9);
    }
  }
}

TEST_CASE("si_snr matches the projection oracle") {
  Rng rng(92);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 500);
    const auto s = random_signal(rng, n);
    const auto e = add(s, random_signal(rng, n), uniform(rng, 0.01, 3));
    CHECK(std::abs(metrics::si_snr(e, s) - oracle_si_snr(e, s)) < 1e-9);
  }
}

TEST_CASE("si_snr edge cases") {
  CHECK(metrics::si_snr(kRef, kRef) == metrics::kPerfect);
  std::vector<double> scaled = kRef;
  for (double& v : scaled) v *= 3.0;
  CHECK(metrics::si_snr(scaled, kRef) == metrics::kPerfect);
  CHECK_THROWS(metrics::si_snr(kRef, std::vector<double>{1, 2}));
  CHECK_THROWS(metrics::si_snr(kRef, std::vector<double>{2, 2, 2, 2}));
}

TEST_CASE("improvement") {
  Rng rng(93);
  const auto s = random_signal(rng, 400);
  const auto mix = add(s, random_signal(rng, 400));
  CHECK(metrics::si_snr_improvement(mix, s, mix) == doctest::Approx(0.0).epsilon(1e-12));
  const auto closer = add(s, add(mix, s, -1.0), 0.3);
  CHECK(metrics::si_snr_improvement(closer, s, mix) > 0.0);

  // 10 dB estimate over a 0 dB mixture.
  const double a = std::sqrt(0.1);
  CHECK(std::abs(metrics::si_snr_improvement(add(kRef, kNoise, a), kRef,
                                             add(kRef, kNoise)) -
                 10.0) < 1e-9);
}

TEST_CASE("snr") {
  CHECK(metrics::snr(add(kRef, kNoise), kRef) == doctest::Approx(0.0));
  CHECK(metrics::snr(kRef, kRef) == metrics::kPerfect);
  CHECK_THROWS(metrics::snr(kRef, std::vector<double>{1}));
}

TEST_CASE("permutation recovery") {
  Rng rng(95);
  const auto a = random_signal(rng, 256);
  const auto b = random_signal(rng, 256);
  const dsp::Waveform mix = wave(add(a, b));
  const metrics::ScoreReport r =
      metrics::score_with_permutation({wave(b), wave(a)}, {wave(a), wave(b)}, mix);
  CHECK(r.permutation == std::vector<int>{1, 0});
  CHECK(r.si_snr[0] == metrics::kPerfect);
  CHECK(r.si_snr[1] == metrics::kPerfect);
  CHECK_THROWS(metrics::score_with_permutation({wave(a)}, {wave(a), wave(b)}, mix));
}

TEST_CASE("three-source scoring matches exhaustive enumeration") {
  Rng rng(96);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<dsp::Waveform> refs, ests;
    std::vector<double> mix(300, 0.0);
    for (int i = 0; i < 3; ++i) {
      refs.push_back(wave(random_signal(rng, 300)));
      mix = add(mix, refs.back().samples);
    }
    for (int i = 0; i < 3; ++i)
      ests.push_back(wave(add(refs[(i + trial) % 3].samples,
                              random_signal(rng, 300), uniform(rng, 0.2, 2))));
    std::vector<int> perm = {0, 1, 2}, best_perm;
    double best = -1e300;
    double identity = 0.0;
    do {
      double total = 0.0;
      for (int i = 0; i < 3; ++i)
        total += oracle_si_snr(ests[i].samples, refs[perm[i]].samples);
      if (perm == std::vector<int>{0, 1, 2}) identity = total / 3;
      if (total > best) {
        best = total;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    const metrics::ScoreReport r =
        metrics::score_with_permutation(ests, refs, wave(mix));
    CHECK(r.permutation == best_perm);
    CHECK(r.mean_si_snr() == doctest::Approx(best / 3).epsilon(1e-12));
    CHECK(r.mean_si_snr() >= identity - 1e-12);
  }
}

TEST_CASE("median and mean") {
  CHECK(metrics::median({3, 1, 2}) == 2.0);
  CHECK(metrics::median({4, 1, 2, 3}) == 2.5);
  const std::vector<double> v = {1, 2, 6};
  CHECK(metrics::mean(v) == 3.0);
  CHECK_THROWS(metrics::median({}));
}

}  // namespace
}  // namespace danet
