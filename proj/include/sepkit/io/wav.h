// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

namespace sepkit::io {

struct WavData {
  int sample_rate = 16000;
  std::vector<std::vector<double>> channels;  // [C][T]

  size_t num_samples() const { return channels.empty() ? 0 : channels[0].size(); }
};

// RIFF/WAVE, 32-bit IEEE float, interleaved. All channels must share a length.
void WriteWav(const std::string& path, const WavData& wav);

// Reads 32-bit float and 16/24/32-bit integer PCM, including the extensible
// header. Throws FormatError on anything else.
WavData ReadWav(const std::string& path);

}  // namespace sepkit::io
