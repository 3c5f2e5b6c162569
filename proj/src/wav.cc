// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/wav.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

namespace danet::io {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::uint16_t get_u16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(const std::vector<std::uint8_t>& b, std::size_t at,
            const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

}  // namespace

std::int16_t quantize(double x) {
  const double scaled = std::round(x * 32768.0);  // half away from zero
  if (scaled >= 32767.0) return 32767;
  if (scaled <= -32768.0) return -32768;
  return static_cast<std::int16_t>(scaled);
}

double dequantize(std::int16_t v) { return static_cast<double>(v) / 32768.0; }

std::vector<std::uint8_t> wav_encode(const dsp::Waveform& w,
                                     std::size_t* clipped) {
  if (w.sample_rate != kWavSampleRate)
    throw std::invalid_argument("WAV output must be 8000 Hz, got " +
                                std::to_string(w.sample_rate));
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(w.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, kWavSampleRate);
  put_u32(out, kWavSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  std::size_t n_clipped = 0;
  for (double x : w.samples) {
    if (!(x >= -1.0 && x <= 1.0)) ++n_clipped;
    put_u16(out, static_cast<std::uint16_t>(quantize(std::isfinite(x) ? x : 0.0)));
  }
  if (clipped != nullptr) *clipped = n_clipped;
  return out;
}

dsp::Waveform wav_decode(const std::vector<std::uint8_t>& b) {
  if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE"))
    throw std::runtime_error("not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  dsp::Waveform w;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(b, pos, "fmt ")) {
      if (size < 16 || body + 16 > b.size())
        throw std::runtime_error("fmt chunk too short");
      const std::uint16_t format = get_u16(b, body);
      const std::uint16_t channels = get_u16(b, body + 2);
      const std::uint32_t rate = get_u32(b, body + 4);
      const std::uint16_t bits = get_u16(b, body + 14);
      if (format != 1)
        throw std::runtime_error("audio format " + std::to_string(format) +
                                 " unsupported: PCM required");
      if (channels != 1)
        throw std::runtime_error("mono required (channels = " +
                                 std::to_string(channels) + ")");
      if (bits != 16)
        throw std::runtime_error("16-bit samples required (bits per sample = " +
                                 std::to_string(bits) + ")");
      if (rate != kWavSampleRate)
        throw std::runtime_error("sample rate must be 8000 Hz (got " +
                                 std::to_string(rate) + ")");
      have_fmt = true;
    } else if (tag_is(b, pos, "data")) {
      if (!have_fmt) throw std::runtime_error("data chunk before fmt chunk");
      if (body + size > b.size())
        throw std::runtime_error("payload shorter than header claims");
      w.sample_rate = kWavSampleRate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] =
            dequantize(static_cast<std::int16_t>(get_u16(b, body + 2 * i)));
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw std::runtime_error(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

std::size_t wav_write(const dsp::Waveform& w,
                      const std::filesystem::path& path) {
  std::size_t clipped = 0;
  const std::vector<std::uint8_t> bytes = wav_encode(w, &clipped);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
  return clipped;
}

dsp::Waveform wav_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return wav_decode(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace danet::io
