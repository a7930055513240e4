// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sepkit/simulate/scene.h"

// Scene manifests: one JSON file per scene plus an index listing them.
// Audio paths inside manifests are relative to the manifest's directory.
namespace sepkit::io {

inline constexpr int kManifestSchemaVersion = 1;

struct SceneRecord {
  std::string id;
  uint64_t seed = 0;
  int bucket = 0;
  std::string bucket_label;
  double angle_difference_deg = 0.0;
  double t60 = 0.0;
  int sample_rate = 16000;
  std::string mixture_path;                  // resolved
  std::vector<std::string> reference_paths;  // resolved
  nlohmann::json raw;
};

struct Manifest {
  std::string index_path;
  std::vector<std::string> bucket_labels;
  std::vector<SceneRecord> scenes;
};

nlohmann::json SceneToJson(const std::string& id, const simulate::SceneGeometry& scene,
                           const simulate::SceneRules& rules, simulate::ReferenceKind reference,
                           const std::string& mixture_file,
                           const std::vector<std::string>& reference_files);

// Throws ManifestError for malformed manifests or missing audio files.
Manifest LoadManifest(const std::string& index_path);

}  // namespace sepkit::io
