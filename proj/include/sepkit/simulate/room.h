// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <vector>

// Shoebox-room acoustics with the image-source method.
namespace sepkit::simulate {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

double Distance(const Vec3& a, const Vec3& b);

struct RoomSpec {
  Vec3 size{6.0, 5.0, 3.0};  // length, width, height in metres
  double t60 = 0.3;
  int sample_rate = 16000;
  double sound_speed = 343.0;
};

// Uniform wall reflection coefficient from Sabine's formula,
// alpha = 0.161 V / (S T60), beta = sqrt(1 - alpha). Rooms too dead for the
// requested T60 (alpha >= 1) get beta = 0.
double ReflectionCoefficient(const RoomSpec& room);

struct RirOptions {
  int max_order = 10;  // sum of per-axis reflection counts
  int64_t length = 0;  // 0 = T60 plus the room's diagonal travel time
};

int64_t RirLength(const RoomSpec& room, const RirOptions& options);

// One image contribution: arrival sample and amplitude beta^order / (4 pi d).
struct ImageTap {
  int64_t delay = 0;
  double amplitude = 0.0;
  int order = 0;
  double distance = 0.0;
};

// All images up to max_order with delay < length, sorted by (delay,
// amplitude). Throws GeometryError for points outside the room or
// coincident source and microphone.
std::vector<ImageTap> ImageTaps(const RoomSpec& room, const Vec3& source, const Vec3& mic,
                                const RirOptions& options);

// Nearest-sample image-method impulse response. Symmetric in source and mic.
std::vector<double> ImageMethodRir(const RoomSpec& room, const Vec3& source, const Vec3& mic,
                                   const RirOptions& options);

inline constexpr int kArrayMics = 6;
inline constexpr double kArrayDiameter = 0.07;

// Six microphones on a horizontal circle; mic i sits at angle
// orientation + 2 pi i / 6 (0-based i).
struct ArraySpec {
  Vec3 center;
  double orientation = 0.0;  // radians
  double diameter = kArrayDiameter;

  std::array<Vec3, kArrayMics> Positions() const;
};

}  // namespace sepkit::simulate
