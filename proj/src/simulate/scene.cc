// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/simulate/scene.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>

#include "sepkit/error.h"

namespace sepkit::simulate {
namespace {

using nlohmann::json;

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double Uniform(std::mt19937_64& rng, const Range& r) {
  return r.hi > r.lo ? Uniform(rng, r.lo, r.hi) : r.lo;
}

Vec3 Vec3FromJson(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("rules: '" + key + "' must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Range RangeFromJson(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError("rules: '" + key + "' must be [lo, hi]");
  }
  Range r{j[0].get<double>(), j[1].get<double>()};
  if (r.hi < r.lo) throw ConfigError("rules: '" + key + "' has hi < lo");
  return r;
}

json RangeToJson(const Range& r) { return json::array({r.lo, r.hi}); }

// Planner calls in FFTW are not thread-safe.
std::mutex& FftwPlannerMutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void SceneRules::Validate() const {
  auto positive_box = [](const Vec3& v) { return v.x > 0 && v.y > 0 && v.z > 0; };
  if (!positive_box(room_min) || room_max.x < room_min.x || room_max.y < room_min.y ||
      room_max.z < room_min.z) {
    throw ConfigError("rules: room_min_m/room_max_m must be positive with max >= min");
  }
  if (t60.lo <= 0.0) throw ConfigError("rules: t60_s must be positive");
  if (wall_margin < 0.0) throw ConfigError("rules: wall_margin_m must be non-negative");
  if (bucket_edges.size() < 2 || bucket_weights.size() + 1 != bucket_edges.size()) {
    throw ConfigError("rules: bucket_weights needs one entry per bucket_edges_deg interval");
  }
  for (size_t i = 1; i < bucket_edges.size(); ++i) {
    if (bucket_edges[i] <= bucket_edges[i - 1]) throw ConfigError("rules: bucket_edges_deg must increase");
  }
  double total = 0.0;
  for (double w : bucket_weights) {
    if (w < 0.0) throw ConfigError("rules: bucket_weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("rules: bucket_weights sum to zero");
  if (num_sources != 2) throw ConfigError("rules: num_sources must be 2");
  if (max_rejections < 1) throw ConfigError("rules: max_rejections must be positive");
  if (distance && distance->lo < 0.0) throw ConfigError("rules: distance_m must be non-negative");
}

int SceneRules::BucketOf(double angle) const {
  for (size_t i = 0; i + 1 < bucket_edges.size(); ++i) {
    const bool last = i + 2 == bucket_edges.size();
    if (angle >= bucket_edges[i] && (angle < bucket_edges[i + 1] || (last && angle <= bucket_edges[i + 1]))) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

std::string SceneRules::BucketLabel(int bucket) const {
  auto fmt = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
    return s;
  };
  return fmt(bucket_edges[bucket]) + "-" + fmt(bucket_edges[bucket + 1]);
}

SceneRules SceneRules::Wsj0() {
  SceneRules r;
  r.name = "wsj0";
  return r;
}

SceneRules SceneRules::Libri() {
  SceneRules r;
  r.name = "librispeech";
  r.room_max = {10.0, 8.0, 6.0};
  r.t60 = {0.05, 0.7};
  r.distance = Range{0.5, 6.0};
  r.first_azimuth_deg = Range{225.0, 315.0};
  r.bucket_weights = {0.11, 0.20, 0.20, 0.49};
  return r;
}

SceneRules SceneRules::FromJson(const json& j) {
  if (!j.is_object()) throw ConfigError("rules: expected a JSON object");
  static const std::set<std::string> known{
      "name", "room_min_m", "room_max_m", "t60_s", "wall_margin_m", "distance_m",
      "first_azimuth_deg", "bucket_edges_deg", "bucket_weights", "num_sources", "max_rejections"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("rules: unknown key '" + key + "'");
  }
  SceneRules r;
  try {
    if (j.contains("name")) r.name = j.at("name").get<std::string>();
    if (j.contains("room_min_m")) r.room_min = Vec3FromJson(j.at("room_min_m"), "room_min_m");
    if (j.contains("room_max_m")) r.room_max = Vec3FromJson(j.at("room_max_m"), "room_max_m");
    if (j.contains("t60_s")) r.t60 = RangeFromJson(j.at("t60_s"), "t60_s");
    if (j.contains("wall_margin_m")) r.wall_margin = j.at("wall_margin_m").get<double>();
    if (j.contains("distance_m") && !j.at("distance_m").is_null())
      r.distance = RangeFromJson(j.at("distance_m"), "distance_m");
    if (j.contains("first_azimuth_deg") && !j.at("first_azimuth_deg").is_null())
      r.first_azimuth_deg = RangeFromJson(j.at("first_azimuth_deg"), "first_azimuth_deg");
    if (j.contains("bucket_edges_deg")) r.bucket_edges = j.at("bucket_edges_deg").get<std::vector<double>>();
    if (j.contains("bucket_weights")) r.bucket_weights = j.at("bucket_weights").get<std::vector<double>>();
    if (j.contains("num_sources")) r.num_sources = j.at("num_sources").get<int>();
    if (j.contains("max_rejections")) r.max_rejections = j.at("max_rejections").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rules: ") + e.what());
  }
  r.Validate();
  return r;
}

json SceneRules::ToJson() const {
  json j;
  j["name"] = name;
  j["room_min_m"] = {room_min.x, room_min.y, room_min.z};
  j["room_max_m"] = {room_max.x, room_max.y, room_max.z};
  j["t60_s"] = RangeToJson(t60);
  j["wall_margin_m"] = wall_margin;
  j["distance_m"] = distance ? RangeToJson(*distance) : json(nullptr);
  j["first_azimuth_deg"] = first_azimuth_deg ? RangeToJson(*first_azimuth_deg) : json(nullptr);
  j["bucket_edges_deg"] = bucket_edges;
  j["bucket_weights"] = bucket_weights;
  j["num_sources"] = num_sources;
  j["max_rejections"] = max_rejections;
  return j;
}

uint64_t SceneSeed(uint64_t master_seed, uint64_t index) {
  // splitmix64 finalizer over the pair.
  uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double AzimuthDeg(const ArraySpec& array, const Vec3& p) {
  double deg = (std::atan2(p.y - array.center.y, p.x - array.center.x) - array.orientation) * 180.0 /
               std::numbers::pi;
  deg = std::fmod(deg, 360.0);
  if (deg < 0.0) deg += 360.0;
  return deg;
}

double AngleDifferenceDeg(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

SceneGeometry SampleScene(const SceneRules& rules, uint64_t seed) {
  rules.Validate();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> bucket_dist(rules.bucket_weights.begin(), rules.bucket_weights.end());
  const int bucket = bucket_dist(rng);
  std::map<std::string, int> reasons;
  const double radius = kArrayDiameter / 2.0;
  const double m = rules.wall_margin;
  auto clear_of_walls = [&](const RoomSpec& room, const Vec3& p) {
    return p.x >= m && p.y >= m && p.z >= m && p.x <= room.size.x - m && p.y <= room.size.y - m &&
           p.z <= room.size.z - m;
  };

  for (int attempt = 0; attempt < rules.max_rejections; ++attempt) {
    SceneGeometry g;
    g.seed = seed;
    g.bucket = bucket;
    g.room.size = {Uniform(rng, rules.room_min.x, rules.room_max.x),
                   Uniform(rng, rules.room_min.y, rules.room_max.y),
                   Uniform(rng, rules.room_min.z, rules.room_max.z)};
    g.room.t60 = Uniform(rng, rules.t60);
    const Vec3& size = g.room.size;
    if (size.x <= 2 * (m + radius) || size.y <= 2 * (m + radius) || size.z <= 2 * m) {
      ++reasons["wall_margin_m"];
      continue;
    }
    g.array.center = {Uniform(rng, m + radius, size.x - m - radius),
                      Uniform(rng, m + radius, size.y - m - radius), Uniform(rng, m, size.z - m)};
    g.array.orientation = Uniform(rng, 0.0, 2.0 * std::numbers::pi);

    std::string reject;
    for (int s = 0; s < rules.num_sources && reject.empty(); ++s) {
      Vec3 p;
      if (rules.distance) {
        const double d = Uniform(rng, *rules.distance);
        const double az = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
        p = {g.array.center.x + d * std::cos(az), g.array.center.y + d * std::sin(az), g.array.center.z};
      } else {
        p = {Uniform(rng, m, size.x - m), Uniform(rng, m, size.y - m), g.array.center.z};
        if (Distance(p, g.array.center) <= radius) reject = "distance_m";
      }
      if (reject.empty() && !clear_of_walls(g.room, p)) reject = "wall_margin_m";
      const double az = AzimuthDeg(g.array, p);
      if (reject.empty() && s == 0 && rules.first_azimuth_deg &&
          (az < rules.first_azimuth_deg->lo || az > rules.first_azimuth_deg->hi)) {
        reject = "first_azimuth_deg";
      }
      g.sources.push_back(p);
      g.azimuth_deg.push_back(az);
    }
    if (reject.empty()) {
      g.angle_difference_deg = AngleDifferenceDeg(g.azimuth_deg[0], g.azimuth_deg[1]);
      if (rules.BucketOf(g.angle_difference_deg) != bucket) reject = "bucket_weights";
    }
    if (reject.empty()) return g;
    ++reasons[reject];
  }
  std::string worst = "wall_margin_m";
  int most = -1;
  for (const auto& [name, count] : reasons) {
    if (count > most) {
      most = count;
      worst = name;
    }
  }
  throw InfeasibleRulesError("rules '" + rules.name + "': no valid scene after " +
                             std::to_string(rules.max_rejections) + " draws; rule '" + worst +
                             "' rejected " + std::to_string(most));
}

const char* ReferenceKindName(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::kDry: return "dry";
    case ReferenceKind::kDirect: return "direct";
    case ReferenceKind::kReverberant: return "reverberant";
  }
  return "?";
}

ReferenceKind ParseReferenceKind(const std::string& name) {
  if (name == "dry") return ReferenceKind::kDry;
  if (name == "direct") return ReferenceKind::kDirect;
  if (name == "reverberant") return ReferenceKind::kReverberant;
  throw ConfigError("unknown reference kind '" + name + "'");
}

std::vector<double> Convolve(const std::vector<double>& a, const std::vector<double>& b, size_t out_len) {
  std::vector<double> out(out_len, 0.0);
  if (a.empty() || b.empty() || out_len == 0) return out;
  const size_t full = a.size() + b.size() - 1;
  size_t n = 1;
  while (n < full) n <<= 1;
  const size_t bins = n / 2 + 1;
  double* buf = fftw_alloc_real(n);
  fftw_complex* fa = fftw_alloc_complex(bins);
  fftw_complex* fb = fftw_alloc_complex(bins);
  fftw_plan forward, inverse;
  {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf, fa, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), fa, buf, FFTW_ESTIMATE);
  }
  std::fill(buf, buf + n, 0.0);
  std::copy(a.begin(), a.end(), buf);
  fftw_execute_dft_r2c(forward, buf, fa);
  std::fill(buf, buf + n, 0.0);
  std::copy(b.begin(), b.end(), buf);
  fftw_execute_dft_r2c(forward, buf, fb);
  for (size_t k = 0; k < bins; ++k) {
    const double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    const double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re;
    fa[k][1] = im;
  }
  fftw_execute_dft_c2r(inverse, fa, buf);
  const double scale = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < std::min(out_len, full); ++i) out[i] = buf[i] * scale;
  {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
  }
  fftw_free(buf);
  fftw_free(fa);
  fftw_free(fb);
  return out;
}

SpatializedMixture SpatializeAndMix(const std::vector<std::vector<double>>& sources,
                                    const SceneGeometry& scene, const MixOptions& options) {
  if (sources.size() != scene.sources.size()) {
    throw InputError("mix: " + std::to_string(sources.size()) + " signals for " +
                     std::to_string(scene.sources.size()) + " source positions");
  }
  size_t len = 0;
  for (const auto& s : sources) len = std::max(len, s.size());
  const auto mics = scene.array.Positions();
  SpatializedMixture out;
  out.mixture.assign(kArrayMics, std::vector<double>(len, 0.0));
  RirOptions direct = options.rir;
  direct.max_order = 0;
  for (size_t s = 0; s < sources.size(); ++s) {
    std::vector<double> src = sources[s];
    src.resize(len, 0.0);
    std::vector<std::vector<double>> per_mic;
    for (int c = 0; c < kArrayMics; ++c) {
      per_mic.push_back(Convolve(src, ImageMethodRir(scene.room, scene.sources[s], mics[c], options.rir), len));
      for (size_t i = 0; i < len; ++i) out.mixture[c][i] += per_mic.back()[i];
    }
    switch (options.reference) {
      case ReferenceKind::kDry: out.references.push_back(src); break;
      case ReferenceKind::kDirect:
        out.references.push_back(Convolve(src, ImageMethodRir(scene.room, scene.sources[s], mics[0], direct), len));
        break;
      case ReferenceKind::kReverberant: out.references.push_back(per_mic[0]); break;
    }
    out.images.push_back(std::move(per_mic));
  }
  return out;
}

std::vector<double> SynthSource(uint64_t seed, double duration_s, Range f0_hz, int sample_rate) {
  if (duration_s < 0.5) throw InputError("synth: duration must be at least 0.5 s");
  if (f0_hz.lo <= 0.0 || f0_hz.hi < f0_hz.lo) throw ConfigError("synth: invalid f0 range");
  std::mt19937_64 rng(seed);
  const auto n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  const double fs = sample_rate;
  const double f0_start = Uniform(rng, f0_hz);
  const double f0_end = f0_start * Uniform(rng, 0.8, 1.25);
  const double vib_rate = Uniform(rng, 3.0, 6.0);
  const double vib_depth = Uniform(rng, 0.02, 0.06);
  const double vib_phase = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double am_rate = Uniform(rng, 2.0, 5.0);
  const double am_phase = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const int harmonics = std::uniform_int_distribution<int>(4, 8)(rng);
  std::vector<double> amp(harmonics), offset(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = Uniform(rng, 0.4, 1.0) / (h + 1);
    offset[h] = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }

  std::vector<double> tone(n, 0.0);
  double phase = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double glide = f0_start + (f0_end - f0_start) * t / duration_s;
    const double f0 = glide * (1.0 + vib_depth * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
    phase += 2.0 * std::numbers::pi * f0 / fs;
    const double env = 0.2 + 0.8 * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * am_rate * t + am_phase));
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      if ((h + 1) * f0 >= 0.45 * fs) break;
      v += amp[h] * std::sin((h + 1) * phase + offset[h]);
    }
    tone[i] = env * v;
  }

  // Pink noise: white noise through Paul Kellet's economy 1/f filter.
  std::normal_distribution<double> white(0.0, 1.0);
  std::vector<double> pink(n);
  double b0 = 0, b1 = 0, b2 = 0;
  for (size_t i = 0; i < n; ++i) {
    const double w = white(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    pink[i] = b0 + b1 + b2 + w * 0.1848;
  }
  auto rms = [](const std::vector<double>& x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return std::sqrt(e / static_cast<double>(x.size()));
  };
  const double noise_gain = 0.1 * rms(tone) / std::max(rms(pink), 1e-12);
  double peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    tone[i] += noise_gain * pink[i];
    peak = std::max(peak, std::abs(tone[i]));
  }
  for (double& v : tone) v *= 0.5 / peak;
  return tone;
}

}  // namespace sepkit::simulate
