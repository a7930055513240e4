// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sepkit/autodiff/tensor.h"
#include "sepkit/codec/codec.h"

// Inter-microphone phase difference (IPD) features.
namespace sepkit::spatial {

using ad::Tensor;

// 1-based microphone indices.
struct MicPair {
  int first = 1;
  int second = 2;
  bool operator==(const MicPair&) const = default;
};

using PairSet = std::vector<MicPair>;

// Pairs used with the six-microphone circular array.
PairSet Wsj0Pairs();
PairSet LibriPairs();

// Throws ConfigError if a pair repeats a microphone or leaves [1, channels].
void ValidatePairs(const PairSet& pairs, int channels);

struct SpatialFeatures {
  Tensor ipd;  // [P x N x F], not wrapped
  Tensor cos_ipd;
  Tensor sin_ipd;

  int64_t num_pairs() const { return ipd.defined() ? ipd.dim(0) : 0; }
};

// ipd[p] = phase[u1] - phase[u2] from per-channel [N x F] phase tensors.
SpatialFeatures ComputeIpd(std::span<const Tensor> phases, const PairSet& pairs);

// Encodes every channel of [C x T] with the STFT bank and takes the phase
// differences. When `expected_frames` is positive the frame count must match.
SpatialFeatures IpdFromWaveform(const Tensor& channels, const codec::KernelBank& bank,
                                const codec::CodecConfig& config, const PairSet& pairs,
                                int64_t expected_frames = 0);

// [primary | cos pairs | sin pairs] along the channel axis.
Tensor AssembleFeatures(const Tensor& primary, const SpatialFeatures& spatial);

}  // namespace sepkit::spatial
