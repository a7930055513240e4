// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/spatial/spatial.h"

#include <string>

#include "sepkit/autodiff/ops.h"
#include "sepkit/error.h"

namespace sepkit::spatial {
namespace {

std::string PairString(const MicPair& p) {
  return "(" + std::to_string(p.first) + ", " + std::to_string(p.second) + ")";
}

// Stacks [N x F] tensors into [P x N x F].
Tensor Stack(const std::vector<Tensor>& planes) {
  if (planes.empty()) return Tensor();
  const ad::Shape inner = planes.front().shape();
  Tensor cat = ad::Concat(planes);
  ad::Shape shape{static_cast<int64_t>(planes.size())};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return ad::Reshape(cat, shape);
}

}  // namespace

PairSet Wsj0Pairs() { return {{1, 4}, {2, 5}, {3, 6}, {1, 2}, {3, 4}, {5, 6}}; }

PairSet LibriPairs() { return {{1, 4}, {2, 5}, {3, 6}, {2, 6}, {3, 5}, {1, 6}, {4, 5}}; }

void ValidatePairs(const PairSet& pairs, int channels) {
  for (const MicPair& p : pairs) {
    if (p.first == p.second) throw ConfigError("spatial: pair " + PairString(p) + " repeats a microphone");
    if (p.first < 1 || p.second < 1 || p.first > channels || p.second > channels) {
      throw ConfigError("spatial: pair " + PairString(p) + " out of range for " +
                        std::to_string(channels) + " channels");
    }
  }
}

SpatialFeatures ComputeIpd(std::span<const Tensor> phases, const PairSet& pairs) {
  ValidatePairs(pairs, static_cast<int>(phases.size()));
  for (const Tensor& p : phases) {
    if (p.shape() != phases.front().shape()) {
      throw AlignmentError("spatial: channel phases " + ad::ShapeToString(p.shape()) + " and " +
                           ad::ShapeToString(phases.front().shape()) + " differ");
    }
  }
  std::vector<Tensor> ipd, cos_ipd, sin_ipd;
  for (const MicPair& p : pairs) {
    Tensor d = ad::Sub(phases[p.first - 1], phases[p.second - 1]);
    cos_ipd.push_back(ad::Cos(d));
    sin_ipd.push_back(ad::Sin(d));
    ipd.push_back(std::move(d));
  }
  return {Stack(ipd), Stack(cos_ipd), Stack(sin_ipd)};
}

SpatialFeatures IpdFromWaveform(const Tensor& channels, const codec::KernelBank& bank,
                                const codec::CodecConfig& config, const PairSet& pairs,
                                int64_t expected_frames) {
  if (channels.ndim() != 2) {
    throw DimensionError("spatial: expected [C x T] channels, got " +
                         ad::ShapeToString(channels.shape()));
  }
  const int64_t num_channels = channels.dim(0);
  ValidatePairs(pairs, static_cast<int>(num_channels));
  std::vector<Tensor> phases;
  for (int64_t c = 0; c < num_channels; ++c) {
    const Tensor row = ad::Reshape(ad::SliceRows(channels, c, 1), {channels.dim(1)});
    phases.push_back(codec::MagnitudePhase(codec::Encode(row, bank, config)).phase);
  }
  const int64_t frames = phases.front().dim(1);
  if (expected_frames > 0 && frames != expected_frames) {
    throw AlignmentError("spatial: IPD has " + std::to_string(frames) +
                         " frames, encoder produced " + std::to_string(expected_frames));
  }
  return ComputeIpd(phases, pairs);
}

Tensor AssembleFeatures(const Tensor& primary, const SpatialFeatures& spatial) {
  if (spatial.num_pairs() == 0) return primary;
  const int64_t pairs = spatial.num_pairs();
  const int64_t bins = spatial.cos_ipd.dim(1);
  const int64_t frames = spatial.cos_ipd.dim(2);
  if (primary.ndim() != 2 || primary.dim(1) != frames) {
    throw AlignmentError("spatial: primary feature " + ad::ShapeToString(primary.shape()) +
                         " does not match " + std::to_string(frames) + " IPD frames");
  }
  const std::vector<Tensor> parts{primary, ad::Reshape(spatial.cos_ipd, {pairs * bins, frames}),
                                  ad::Reshape(spatial.sin_ipd, {pairs * bins, frames})};
  return ad::Concat(parts);
}

}  // namespace sepkit::spatial
