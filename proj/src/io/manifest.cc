// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/io/manifest.h"

#include <filesystem>
#include <fstream>

#include "sepkit/error.h"

namespace sepkit::io {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json Point(const simulate::Vec3& p) { return json::array({p.x, p.y, p.z}); }

json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("manifest: cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ManifestError("manifest: " + path.string() + ": " + e.what());
  }
}

template <typename T>
T Field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ManifestError("manifest: " + where + " lacks '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ManifestError("manifest: " + where + " has a malformed '" + key + "'");
  }
}

std::string Resolve(const fs::path& dir, const std::string& rel, const std::string& where) {
  const fs::path p = dir / rel;
  if (!fs::exists(p)) throw ManifestError("manifest: " + where + " references missing file " + p.string());
  return p.string();
}

}  // namespace

json SceneToJson(const std::string& id, const simulate::SceneGeometry& scene,
                 const simulate::SceneRules& rules, simulate::ReferenceKind reference,
                 const std::string& mixture_file, const std::vector<std::string>& reference_files) {
  json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["id"] = id;
  j["seed"] = scene.seed;
  j["rules"] = rules.name;
  j["sample_rate"] = scene.room.sample_rate;
  j["room"] = {{"size_m", Point(scene.room.size)},
               {"t60_s", scene.room.t60},
               {"sound_speed_mps", scene.room.sound_speed},
               {"reflection_coefficient", simulate::ReflectionCoefficient(scene.room)}};
  json mics = json::array();
  for (const auto& m : scene.array.Positions()) mics.push_back(Point(m));
  j["array"] = {{"center_m", Point(scene.array.center)},
                {"orientation_rad", scene.array.orientation},
                {"diameter_m", scene.array.diameter},
                {"mics_m", mics}};
  json sources = json::array();
  for (size_t s = 0; s < scene.sources.size(); ++s) {
    sources.push_back({{"position_m", Point(scene.sources[s])}, {"azimuth_deg", scene.azimuth_deg[s]}});
  }
  j["sources"] = sources;
  j["angle_difference_deg"] = scene.angle_difference_deg;
  j["bucket"] = scene.bucket;
  j["bucket_label"] = rules.BucketLabel(scene.bucket);
  j["reference_kind"] = simulate::ReferenceKindName(reference);
  j["mixture"] = mixture_file;
  j["references"] = reference_files;
  return j;
}

Manifest LoadManifest(const std::string& index_path) {
  const fs::path index(index_path);
  const json j = ReadJson(index);
  const std::string where = index.string();
  if (Field<int>(j, "schema_version", where) != kManifestSchemaVersion) {
    throw ManifestError("manifest: unsupported schema_version in " + where);
  }
  Manifest m;
  m.index_path = index_path;
  m.bucket_labels = Field<std::vector<std::string>>(j, "bucket_labels", where);
  const fs::path dir = index.parent_path();
  for (const std::string& rel : Field<std::vector<std::string>>(j, "scenes", where)) {
    const fs::path scene_path = dir / rel;
    const json s = ReadJson(scene_path);
    const std::string sw = scene_path.string();
    const fs::path sdir = scene_path.parent_path();
    SceneRecord r;
    r.id = Field<std::string>(s, "id", sw);
    r.seed = Field<uint64_t>(s, "seed", sw);
    r.bucket = Field<int>(s, "bucket", sw);
    r.bucket_label = Field<std::string>(s, "bucket_label", sw);
    r.angle_difference_deg = Field<double>(s, "angle_difference_deg", sw);
    r.sample_rate = Field<int>(s, "sample_rate", sw);
    if (!s.contains("room")) throw ManifestError("manifest: " + sw + " lacks 'room'");
    r.t60 = Field<double>(s.at("room"), "t60_s", sw + " room");
    r.mixture_path = Resolve(sdir, Field<std::string>(s, "mixture", sw), sw);
    for (const std::string& ref : Field<std::vector<std::string>>(s, "references", sw)) {
      r.reference_paths.push_back(Resolve(sdir, ref, sw));
    }
    if (r.reference_paths.empty()) throw ManifestError("manifest: " + sw + " lists no references");
    if (r.bucket < 0 || r.bucket >= static_cast<int>(m.bucket_labels.size())) {
      throw ManifestError("manifest: " + sw + " bucket out of range");
    }
    r.raw = s;
    m.scenes.push_back(std::move(r));
  }
  return m;
}

}  // namespace sepkit::io
