// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/dsp.h"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace danet::dsp {

void Waveform::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be > 0");
  if (samples.empty()) throw std::invalid_argument("waveform is empty");
  for (double s : samples) {
    if (!std::isfinite(s))
      throw std::invalid_argument("waveform contains non-finite samples");
  }
}

void StftConfig::validate() const {
  if (window_len < 2 || window_len % 2 != 0)
    throw std::invalid_argument("window_len must be even and >= 2, got " +
                                std::to_string(window_len));
  if (hop <= 0 || hop > window_len)
    throw std::invalid_argument("hop must satisfy 0 < hop <= window_len");
}

Eigen::RowVectorXd MagnitudeSpectrogram::flatten() const {
  return Eigen::Map<const Eigen::RowVectorXd>(values.data(), values.size());
}

MagnitudeSpectrogram MagnitudeSpectrogram::unflatten(
    const Eigen::RowVectorXd& flat, Eigen::Index bins) {
  if (bins <= 0 || flat.size() % bins != 0)
    throw std::invalid_argument("flat length is not a multiple of bins");
  MagnitudeSpectrogram out;
  out.values = Eigen::Map<const Eigen::MatrixXd>(flat.data(), bins,
                                                 flat.size() / bins);
  return out;
}

std::vector<double> sqrt_hann(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n));
  return w;
}

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) *
                       (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles from cos/sin directly rather than a recurrence keeps
      // rounding error flat across stages.
      const std::complex<double> tw(std::cos(ang * k), std::sin(ang * k));
      for (std::size_t i = k; i < n; i += len) {
        std::complex<double> u = a[i];
        std::complex<double> v = a[i + half] * tw;
        a[i] = u + v;
        a[i + half] = u - v;
      }
    }
  }
}

void direct_dft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  std::vector<std::complex<double>> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = sign * 2.0 * std::numbers::pi *
                         static_cast<double>((k * t) % n) /
                         static_cast<double>(n);
      acc += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  a = std::move(out);
}

}  // namespace

void fft(std::vector<std::complex<double>>& data, bool inverse) {
  if (data.empty()) return;
  if (is_pow2(data.size()))
    radix2(data, inverse);
  else
    direct_dft(data, inverse);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
  }
}

Eigen::Index num_frames(std::size_t length, const StftConfig& cfg) {
  if (length < static_cast<std::size_t>(cfg.window_len)) return 0;
  return 1 + static_cast<Eigen::Index>((length - cfg.window_len) / cfg.hop);
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.samples.size() < static_cast<std::size_t>(cfg.window_len))
    throw std::invalid_argument("signal too short");
  const int n = cfg.fft_size();
  const int bins = cfg.num_bins();
  const Eigen::Index frames = num_frames(w.samples.size(), cfg);
  const std::vector<double> win = sqrt_hann(cfg.window_len);

  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.sample_rate = w.sample_rate;
  spec.values.resize(bins, frames);
  std::vector<std::complex<double>> buf(n);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) buf[i] = w.samples[start + i] * win[i];
    fft(buf, false);
    for (int f = 0; f < bins; ++f) spec.values(f, t) = buf[f];
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.bins() != cfg.num_bins())
    throw std::invalid_argument(
        "spectrogram has " + std::to_string(spec.bins()) +
        " bins but fft_size " + std::to_string(cfg.fft_size()) + " needs " +
        std::to_string(cfg.num_bins()));
  const int n = cfg.fft_size();
  const Eigen::Index frames = spec.frames();
  const std::vector<double> win = sqrt_hann(cfg.window_len);

  Waveform out;
  out.sample_rate = spec.sample_rate;
  if (frames == 0) return out;
  const std::size_t length =
      static_cast<std::size_t>(frames - 1) * cfg.hop + cfg.window_len;
  out.samples.assign(length, 0.0);
  std::vector<double> norm(length, 0.0);
  std::vector<std::complex<double>> buf(n);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int f = 0; f < cfg.num_bins(); ++f) buf[f] = spec.values(f, t);
    // Hermitian completion; DC and Nyquist are taken as real.
    buf[0] = buf[0].real();
    buf[n / 2] = buf[n / 2].real();
    for (int f = n / 2 + 1; f < n; ++f) buf[f] = std::conj(buf[n - f]);
    fft(buf, true);
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) {
      out.samples[start + i] += buf[i].real() * win[i];
      norm[start + i] += win[i] * win[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i)
    out.samples[i] = norm[i] > 1e-10 ? out.samples[i] / norm[i] : 0.0;
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram mag;
  mag.values = spec.values.cwiseAbs();
  return mag;
}

Eigen::MatrixXd log_magnitude(const MagnitudeSpectrogram& mag, double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("log floor must be > 0");
  return mag.values.array().max(floor).log().matrix();
}

Waveform reconstruct(const Eigen::RowVectorXd& mask_row,
                     const ComplexSpectrogram& mix) {
  if (mask_row.size() != mix.values.size())
    throw std::invalid_argument(
        "mask has " + std::to_string(mask_row.size()) +
        " entries but the mixture has " + std::to_string(mix.values.size()) +
        " bins");
  if (mask_row.size() > 0 &&
      (mask_row.minCoeff() < 0.0 || mask_row.maxCoeff() > 1.0))
    throw std::invalid_argument("mask entries must lie in [0, 1]");
  ComplexSpectrogram est = mix;
  // Scaling the complex value by a non-negative mask scales the magnitude
  // and leaves the phase untouched.
  Eigen::Map<const Eigen::MatrixXd> mask(mask_row.data(), mix.bins(),
                                         mix.frames());
  est.values = mix.values.array() * mask.array().cast<std::complex<double>>();
  return istft(est);
}

double power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace danet::dsp
