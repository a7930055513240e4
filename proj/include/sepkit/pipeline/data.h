// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sepkit/autodiff/tensor.h"
#include "sepkit/io/manifest.h"
#include "sepkit/simulate/scene.h"

namespace sepkit::pipeline {

using ad::Tensor;

struct SceneData {
  std::string id;
  int bucket = 0;
  std::string bucket_label;
  double angle_difference_deg = 0.0;
  double overlap = 1.0;
  int sample_rate = 16000;
  std::vector<std::vector<double>> mixture;     // [C][T]
  std::vector<std::vector<double>> references;  // [S][T]

  int64_t num_samples() const { return mixture.empty() ? 0 : static_cast<int64_t>(mixture[0].size()); }
};

struct DatasetOptions {
  double duration_s = 4.0;  // length of each dry source
  // Fraction of a source that overlaps the first one, drawn per scene.
  // Later sources start (1 - overlap) * duration_s after the first; {1, 1}
  // is full overlap.
  simulate::Range overlap{1.0, 1.0};
  simulate::MixOptions mix;
};

std::string SceneId(uint64_t index);

// Scene `index` of the corpus defined by (rules, master_seed): geometry,
// synthetic dry sources and the spatialized mixture.
SceneData SimulateScene(const simulate::SceneRules& rules, uint64_t master_seed, uint64_t index,
                        const DatasetOptions& options, simulate::SceneGeometry* geometry = nullptr);

struct DatasetSummary {
  std::string index_path;
  std::vector<std::string> bucket_labels;
  std::vector<int> bucket_counts;
};

// Writes index.json, scenes/<id>.json and audio/<id>_{mix,s1,..}.wav under
// out_dir. Output bytes depend only on the arguments, not on `threads`.
DatasetSummary WriteDataset(const simulate::SceneRules& rules, int count, uint64_t master_seed,
                            const std::string& out_dir, const DatasetOptions& options, int threads);

// Reads the audio of one manifest entry. The mixture must have `channels`
// channels, or at least that many when `channels` is 1 (mic 1 is kept).
SceneData LoadScene(const io::SceneRecord& record, int channels);
std::vector<SceneData> LoadScenes(const io::Manifest& manifest, int channels, int threads);

// Mixture channels [C x T] and references S x [T] as tensors, restricted to
// samples [start, start + length) and zero-padded past the end.
Tensor MixtureTensor(const SceneData& scene, int channels, int64_t start = 0, int64_t length = -1);
std::vector<Tensor> ReferenceTensors(const SceneData& scene, int64_t start = 0, int64_t length = -1);

struct Chunk {
  size_t scene = 0;
  int64_t start = 0;
  int64_t length = 0;
  bool padded = false;  // extends past the end of the scene
};

// Chunks of chunk_samples starting every hop_samples (default: chunk_samples,
// i.e. non-overlapping). The last chunk of a scene is the first one reaching
// its end; if it extends past the end it is zero-padded and flagged.
// Boundaries are shared by all channels and references of a scene.
std::vector<Chunk> MakeChunks(const std::vector<SceneData>& scenes, int64_t chunk_samples,
                              int64_t hop_samples = 0);

}  // namespace sepkit::pipeline
