// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// STFT analysis/synthesis with square-root Hann windows.
//
// Spectrograms are F x T (frequency rows, frame columns). Whenever a
// spectrogram is flattened to a 1 x FT row the frequency index varies
// fastest: bin (f, t) lands at column t * F + f. This is the column-major
// memory order of the F x T matrix, and every module relies on it.

#ifndef DANET_DSP_H_
#define DANET_DSP_H_

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace danet::dsp {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 8000;

  std::size_t size() const { return samples.size(); }
  // Throws if empty, non-finite, or sample_rate <= 0.
  void validate() const;
};

struct StftConfig {
  int window_len = 256;
  int hop = 64;

  int fft_size() const { return window_len; }
  int num_bins() const { return window_len / 2 + 1; }
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

struct ComplexSpectrogram {
  Eigen::MatrixXcd values;  // F x T
  StftConfig config;
  int sample_rate = 8000;

  Eigen::Index bins() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
};

struct MagnitudeSpectrogram {
  Eigen::MatrixXd values;  // F x T, non-negative

  Eigen::Index bins() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
  // 1 x FT, frequency index fastest.
  Eigen::RowVectorXd flatten() const;
  static MagnitudeSpectrogram unflatten(const Eigen::RowVectorXd& flat,
                                        Eigen::Index bins);
};

// Periodic square-root Hann window of length n.
std::vector<double> sqrt_hann(int n);

// In-place complex DFT. Power-of-two sizes use radix-2, other sizes fall
// back to the direct O(n^2) sum. inverse=true applies the 1/n scaling.
void fft(std::vector<std::complex<double>>& data, bool inverse);

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg = {});
Waveform istft(const ComplexSpectrogram& spec);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

// Elementwise ln(max(value, floor)).
Eigen::MatrixXd log_magnitude(const MagnitudeSpectrogram& mag,
                              double floor = 1e-8);

// Scales the mixture magnitude by mask_row (1 x FT), keeps the mixture
// phase and inverts.
Waveform reconstruct(const Eigen::RowVectorXd& mask_row,
                     const ComplexSpectrogram& mix);

// Number of frames stft() produces for a signal of the given length.
Eigen::Index num_frames(std::size_t length, const StftConfig& cfg);

double power(std::span<const double> x);

}  // namespace danet::dsp

#endif  // DANET_DSP_H_
