// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/io/wav.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sepkit/error.h"

namespace sepkit::io {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes little-endian");

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
void Append(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Read(const std::string& bytes, size_t pos, const std::string& path) {
  if (pos + sizeof(T) > bytes.size()) throw FormatError("wav: truncated header in " + path);
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  return v;
}

}  // namespace

void WriteWav(const std::string& path, const WavData& wav) {
  const size_t channels = wav.channels.size();
  if (channels == 0 || channels > 64) throw UsageError("wav: channel count must be 1..64");
  const size_t frames = wav.channels[0].size();
  for (const auto& c : wav.channels) {
    if (c.size() != frames) throw UsageError("wav: channels differ in length");
  }
  const auto data_bytes = static_cast<uint32_t>(frames * channels * 4);
  std::string out;
  out.reserve(58 + data_bytes);
  out += "RIFF";
  Append<uint32_t>(out, 4 + (8 + 18) + (8 + 4) + (8 + data_bytes));
  out += "WAVE";
  out += "fmt ";
  Append<uint32_t>(out, 18);
  Append<uint16_t>(out, kFormatFloat);
  Append<uint16_t>(out, static_cast<uint16_t>(channels));
  Append<uint32_t>(out, static_cast<uint32_t>(wav.sample_rate));
  Append<uint32_t>(out, static_cast<uint32_t>(wav.sample_rate * channels * 4));
  Append<uint16_t>(out, static_cast<uint16_t>(channels * 4));
  Append<uint16_t>(out, 32);
  Append<uint16_t>(out, 0);
  out += "fact";
  Append<uint32_t>(out, 4);
  Append<uint32_t>(out, static_cast<uint32_t>(frames));
  out += "data";
  Append<uint32_t>(out, data_bytes);
  for (size_t t = 0; t < frames; ++t)
    for (size_t c = 0; c < channels; ++c) Append<float>(out, static_cast<float>(wav.channels[c][t]));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("wav: cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError("wav: write failed for " + path);
}

WavData ReadWav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("wav: cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw FormatError("wav: not a RIFF/WAVE file: " + path);
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = Read<uint32_t>(bytes, pos + 4, path);
    const size_t body = pos + 8;
    if (id == "fmt ") {
      format = Read<uint16_t>(bytes, body, path);
      channels = Read<uint16_t>(bytes, body + 2, path);
      rate = Read<uint32_t>(bytes, body + 4, path);
      bits = Read<uint16_t>(bytes, body + 14, path);
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError("wav: short extensible header in " + path);
        format = Read<uint16_t>(bytes, body + 24, path);
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data before fmt in " + path);
      if (channels == 0) throw FormatError("wav: zero channels in " + path);
      const size_t avail = std::min<size_t>(size, bytes.size() - body);
      const size_t width = bits / 8;
      const bool ok = (format == kFormatFloat && bits == 32) ||
                      (format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32));
      if (!ok) {
        throw FormatError("wav: unsupported encoding (format " + std::to_string(format) + ", " +
                          std::to_string(bits) + " bits) in " + path);
      }
      const size_t frames = avail / (width * channels);
      WavData wav;
      wav.sample_rate = static_cast<int>(rate);
      wav.channels.assign(channels, std::vector<double>(frames));
      const char* p = bytes.data() + body;
      for (size_t t = 0; t < frames; ++t) {
        for (size_t c = 0; c < channels; ++c, p += width) {
          double v = 0.0;
          if (format == kFormatFloat) {
            float x;
            std::memcpy(&x, p, 4);
            v = x;
          } else if (bits == 16) {
            int16_t x;
            std::memcpy(&x, p, 2);
            v = x / 32768.0;
          } else if (bits == 24) {
            int32_t x = (static_cast<uint8_t>(p[0]) << 8) | (static_cast<uint8_t>(p[1]) << 16) |
                        (static_cast<uint8_t>(p[2]) << 24);
            v = (x >> 8) / 8388608.0;
          } else {
            int32_t x;
            std::memcpy(&x, p, 4);
            v = x / 2147483648.0;
          }
          wav.channels[c][t] = v;
        }
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("wav: no data chunk in " + path);
}

}  // namespace sepkit::io
