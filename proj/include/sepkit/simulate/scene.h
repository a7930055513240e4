// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sepkit/simulate/room.h"

namespace sepkit::simulate {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Constraints for drawing two-speaker scenes around a six-mic array.
struct SceneRules {
  std::string name = "custom";
  Vec3 room_min{3.0, 3.0, 2.5};
  Vec3 room_max{8.0, 10.0, 6.0};
  Range t60{0.05, 0.5};
  double wall_margin = 0.3;
  // Speaker-to-array-centre distance; unset means anywhere in the room.
  std::optional<Range> distance;
  // Azimuth window for the first speaker relative to the array orientation.
  std::optional<Range> first_azimuth_deg;
  // Angle-difference bucket edges in degrees and target proportions.
  std::vector<double> bucket_edges{0.0, 15.0, 45.0, 90.0, 180.0};
  std::vector<double> bucket_weights{0.16, 0.29, 0.26, 0.29};
  int num_sources = 2;
  int max_rejections = 10000;

  void Validate() const;
  int BucketOf(double angle_difference_deg) const;
  std::string BucketLabel(int bucket) const;

  static SceneRules Wsj0();
  static SceneRules Libri();
  static SceneRules FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

struct SceneGeometry {
  RoomSpec room;
  ArraySpec array;
  std::vector<Vec3> sources;
  std::vector<double> azimuth_deg;  // relative to array orientation, [0, 360)
  double angle_difference_deg = 0.0;
  int bucket = 0;
  uint64_t seed = 0;
};

// Per-scene RNG seed derived from a master seed and a scene index.
uint64_t SceneSeed(uint64_t master_seed, uint64_t index);

// Draws the bucket from the target proportions, then rejection-samples the
// geometry. Throws InfeasibleRulesError naming the most frequent rejection
// reason after rules.max_rejections failed draws.
SceneGeometry SampleScene(const SceneRules& rules, uint64_t seed);

double AzimuthDeg(const ArraySpec& array, const Vec3& point);
double AngleDifferenceDeg(double a_deg, double b_deg);

enum class ReferenceKind { kDry, kDirect, kReverberant };
const char* ReferenceKindName(ReferenceKind kind);
ReferenceKind ParseReferenceKind(const std::string& name);

struct MixOptions {
  ReferenceKind reference = ReferenceKind::kReverberant;
  RirOptions rir;
};

struct SpatializedMixture {
  std::vector<std::vector<double>> mixture;                 // [C][T]
  std::vector<std::vector<double>> references;              // [S][T], at mic 1
  std::vector<std::vector<std::vector<double>>> images;     // [S][C][T]
};

// Convolves each source with its per-mic RIRs and sums per channel. Shorter
// sources are zero-padded to the longest; outputs keep that length.
SpatializedMixture SpatializeAndMix(const std::vector<std::vector<double>>& sources,
                                    const SceneGeometry& scene, const MixOptions& options);

// Linear convolution truncated to out_len samples (FFT based).
std::vector<double> Convolve(const std::vector<double>& a, const std::vector<double>& b,
                             size_t out_len);

// Amplitude-modulated harmonic stack with a wandering f0 plus pink noise
// 20 dB down, peak-normalized to 0.5.
std::vector<double> SynthSource(uint64_t seed, double duration_s, Range f0_hz = {90.0, 250.0},
                                int sample_rate = 16000);

}  // namespace sepkit::simulate
