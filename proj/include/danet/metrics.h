// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DANET_METRICS_H_
#define DANET_METRICS_H_

#include <limits>
#include <span>
#include <vector>

#include "danet/dsp.h"

namespace danet::metrics {

// Returned when the estimate is an exact scaled copy of the reference.
inline constexpr double kPerfect = std::numeric_limits<double>::infinity();

// Scale-invariant SNR in dB. Both signals are made zero-mean first.
// Throws on length mismatch or an all-zero (after mean removal) reference.
double si_snr(std::span<const double> estimate,
              std::span<const double> reference);

double si_snr_improvement(std::span<const double> estimate,
                          std::span<const double> reference,
                          std::span<const double> mixture);

// Plain SNR: 10 log10(|s|^2 / |s - s^|^2), no mean removal or scaling.
double snr(std::span<const double> estimate,
           std::span<const double> reference);

struct ScoreReport {
  // Estimate i is matched with reference permutation[i]; per-source values
  // are indexed by estimate.
  std::vector<int> permutation;
  std::vector<double> si_snr;
  std::vector<double> si_snri;
  std::vector<double> snr;

  double mean_si_snr() const;
  double mean_si_snri() const;
};

// Picks the estimate-to-reference matching with the largest mean SI-SNR
// (lexicographically first on ties).
ScoreReport score_with_permutation(const std::vector<dsp::Waveform>& estimates,
                                   const std::vector<dsp::Waveform>& references,
                                   const dsp::Waveform& mixture);

double median(std::vector<double> values);
double mean(std::span<const double> values);

}  // namespace danet::metrics

#endif  // DANET_METRICS_H_
