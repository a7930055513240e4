// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/simulate/room.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sepkit/error.h"

namespace sepkit::simulate {
namespace {

bool Inside(const RoomSpec& room, const Vec3& p) {
  return p.x > 0.0 && p.y > 0.0 && p.z > 0.0 && p.x < room.size.x && p.y < room.size.y &&
         p.z < room.size.z;
}

std::string PointString(const Vec3& p) {
  return "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " + std::to_string(p.z) + ")";
}

// Offset along one axis from the microphone to image m of the source.
// Even m = 2l is a translated copy, odd m = 2l - 1 a mirrored one. Both forms
// are symmetric under swapping source and microphone up to sign, which keeps
// the response bit-identical under reciprocity.
double AxisOffset(int m, double src, double mic, double len) {
  if (m % 2 == 0) return (src - mic) + m * len;
  return (m + 1) * len - (src + mic);
}

}  // namespace

double Distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double ReflectionCoefficient(const RoomSpec& room) {
  if (room.t60 <= 0.0) throw ConfigError("room: T60 must be positive");
  const Vec3& s = room.size;
  const double volume = s.x * s.y * s.z;
  const double surface = 2.0 * (s.x * s.y + s.x * s.z + s.y * s.z);
  const double alpha = 0.161 * volume / (surface * room.t60);
  if (alpha >= 1.0) return 0.0;
  return std::sqrt(1.0 - alpha);
}

int64_t RirLength(const RoomSpec& room, const RirOptions& options) {
  if (options.length > 0) return options.length;
  const Vec3& s = room.size;
  const double diagonal = std::sqrt(s.x * s.x + s.y * s.y + s.z * s.z);
  return static_cast<int64_t>(std::ceil(room.t60 * room.sample_rate)) +
         static_cast<int64_t>(std::ceil(diagonal / room.sound_speed * room.sample_rate)) + 1;
}

std::vector<ImageTap> ImageTaps(const RoomSpec& room, const Vec3& source, const Vec3& mic,
                                const RirOptions& options) {
  if (!Inside(room, source)) throw GeometryError("room: source " + PointString(source) + " outside room");
  if (!Inside(room, mic)) throw GeometryError("room: microphone " + PointString(mic) + " outside room");
  if (source == mic) throw GeometryError("room: source and microphone coincide");
  if (options.max_order < 0) throw ConfigError("room: max_order must be non-negative");
  const double beta = ReflectionCoefficient(room);
  const int64_t length = RirLength(room, options);
  const double fs = room.sample_rate;
  const int k = options.max_order;
  std::vector<ImageTap> taps;
  for (int mx = -k; mx <= k; ++mx) {
    const double dx = AxisOffset(mx, source.x, mic.x, room.size.x);
    const int rx = k - std::abs(mx);
    for (int my = -rx; my <= rx; ++my) {
      const double dy = AxisOffset(my, source.y, mic.y, room.size.y);
      const int rz = rx - std::abs(my);
      for (int mz = -rz; mz <= rz; ++mz) {
        const double dz = AxisOffset(mz, source.z, mic.z, room.size.z);
        const int order = std::abs(mx) + std::abs(my) + std::abs(mz);
        const double reflection = order == 0 ? 1.0 : std::pow(beta, order);
        if (reflection == 0.0) continue;
        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        const auto delay = static_cast<int64_t>(std::llround(fs * d / room.sound_speed));
        if (delay >= length) continue;
        taps.push_back({delay, reflection / (4.0 * std::numbers::pi * d), order, d});
      }
    }
  }
  std::sort(taps.begin(), taps.end(), [](const ImageTap& a, const ImageTap& b) {
    if (a.delay != b.delay) return a.delay < b.delay;
    return a.amplitude < b.amplitude;
  });
  return taps;
}

std::vector<double> ImageMethodRir(const RoomSpec& room, const Vec3& source, const Vec3& mic,
                                   const RirOptions& options) {
  std::vector<double> h(static_cast<size_t>(RirLength(room, options)), 0.0);
  for (const ImageTap& t : ImageTaps(room, source, mic, options)) h[static_cast<size_t>(t.delay)] += t.amplitude;
  return h;
}

std::array<Vec3, kArrayMics> ArraySpec::Positions() const {
  std::array<Vec3, kArrayMics> out;
  const double r = diameter / 2.0;
  for (int i = 0; i < kArrayMics; ++i) {
    const double a = orientation + 2.0 * std::numbers::pi * i / kArrayMics;
    out[i] = {center.x + r * std::cos(a), center.y + r * std::sin(a), center.z};
  }
  return out;
}

}  // namespace sepkit::simulate
