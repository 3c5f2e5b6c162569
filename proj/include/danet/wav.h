// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// 16-bit PCM mono 8 kHz WAV files.

#ifndef DANET_WAV_H_
#define DANET_WAV_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "danet/dsp.h"

namespace danet::io {

inline constexpr int kWavSampleRate = 8000;

// round(x * 32768) with round-half-away-from-zero, saturated to int16.
std::int16_t quantize(double x);
double dequantize(std::int16_t v);

// Encoded file bytes; `clipped` receives the number of saturated samples.
std::vector<std::uint8_t> wav_encode(const dsp::Waveform& w,
                                     std::size_t* clipped = nullptr);
dsp::Waveform wav_decode(const std::vector<std::uint8_t>& bytes);

// Returns the number of samples that had to be clipped.
std::size_t wav_write(const dsp::Waveform& w,
                      const std::filesystem::path& path);
dsp::Waveform wav_read(const std::filesystem::path& path);

}  // namespace danet::io

#endif  // DANET_WAV_H_
