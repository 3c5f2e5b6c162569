// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace danet::metrics {

namespace {

std::vector<double> zero_mean(std::span<const double> x) {
  const double m =
      std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v -= m;
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b)
    throw std::invalid_argument("signal lengths differ (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  if (a == 0) throw std::invalid_argument("empty signal");
}

}  // namespace

double si_snr(std::span<const double> estimate,
              std::span<const double> reference) {
  check_lengths(estimate.size(), reference.size());
  const std::vector<double> s = zero_mean(reference);
  const std::vector<double> e = zero_mean(estimate);
  const double ref_energy = dot(s, s);
  if (!(ref_energy > 0.0))
    throw std::invalid_argument("reference is zero after mean removal");
  const double alpha = dot(e, s) / ref_energy;
  double target = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = alpha * s[i];
    target += t * t;
    noise += (e[i] - t) * (e[i] - t);
  }
  if (noise == 0.0) return kPerfect;
  return 10.0 * std::log10(target / noise);
}

double si_snr_improvement(std::span<const double> estimate,
                          std::span<const double> reference,
                          std::span<const double> mixture) {
  return si_snr(estimate, reference) - si_snr(mixture, reference);
}

double snr(std::span<const double> estimate,
           std::span<const double> reference) {
  check_lengths(estimate.size(), reference.size());
  double sig = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    sig += reference[i] * reference[i];
    err += (reference[i] - estimate[i]) * (reference[i] - estimate[i]);
  }
  if (err == 0.0) return kPerfect;
  return 10.0 * std::log10(sig / err);
}

double ScoreReport::mean_si_snr() const { return mean(si_snr); }
double ScoreReport::mean_si_snri() const { return mean(si_snri); }

ScoreReport score_with_permutation(const std::vector<dsp::Waveform>& estimates,
                                   const std::vector<dsp::Waveform>& references,
                                   const dsp::Waveform& mixture) {
  if (estimates.size() != references.size() || estimates.empty())
    throw std::invalid_argument("need the same non-zero number of estimates "
                                "and references");
  const std::size_t c = estimates.size();
  std::vector<std::vector<double>> table(c, std::vector<double>(c));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      table[i][j] = si_snr(estimates[i].samples, references[j].samples);

  std::vector<int> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm = perm;
  double best = -std::numeric_limits<double>::infinity();
  bool first = true;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) total += table[i][perm[i]];
    if (first || total > best) {
      best = total;
      best_perm = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ScoreReport report;
  report.permutation = best_perm;
  for (std::size_t i = 0; i < c; ++i) {
    const auto& ref = references[best_perm[i]].samples;
    report.si_snr.push_back(table[i][best_perm[i]]);
    report.si_snri.push_back(table[i][best_perm[i]] -
                             si_snr(mixture.samples, ref));
    report.snr.push_back(snr(estimates[i].samples, ref));
  }
  return report;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace danet::metrics
