// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/pipeline/data.h"

#include <cstdio>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <random>

#include "sepkit/error.h"
#include "sepkit/io/wav.h"
#include "sepkit/pipeline/parallel.h"

namespace sepkit::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void WriteText(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("dataset: cannot write " + tmp.string());
    out << text;
    if (!out) throw InputError("dataset: write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

std::string SceneId(uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05llu", static_cast<unsigned long long>(index));
  return buf;
}

SceneData SimulateScene(const simulate::SceneRules& rules, uint64_t master_seed, uint64_t index,
                        const DatasetOptions& options, simulate::SceneGeometry* geometry) {
  const simulate::SceneGeometry g = simulate::SampleScene(rules, simulate::SceneSeed(master_seed, index));
  if (options.overlap.lo < 0.0 || options.overlap.hi > 1.0 || options.overlap.lo > options.overlap.hi) {
    throw ConfigError("dataset: overlap range must lie within [0, 1]");
  }
  std::mt19937_64 rng(simulate::SceneSeed(g.seed, 2000));
  const double overlap = options.overlap.lo == options.overlap.hi
                             ? options.overlap.lo
                             : std::uniform_real_distribution<double>(options.overlap.lo, options.overlap.hi)(rng);
  const auto offset = static_cast<size_t>(std::llround((1.0 - overlap) * options.duration_s * g.room.sample_rate));
  std::vector<std::vector<double>> dry;
  for (int s = 0; s < rules.num_sources; ++s) {
    std::vector<double> x = simulate::SynthSource(simulate::SceneSeed(g.seed, 1000 + s), options.duration_s,
                                                  {90.0, 250.0}, g.room.sample_rate);
    if (s > 0 && offset > 0) x.insert(x.begin(), offset, 0.0);
    dry.push_back(std::move(x));
  }
  simulate::SpatializedMixture mix = simulate::SpatializeAndMix(dry, g, options.mix);
  SceneData d;
  d.id = SceneId(index);
  d.bucket = g.bucket;
  d.bucket_label = rules.BucketLabel(g.bucket);
  d.angle_difference_deg = g.angle_difference_deg;
  d.overlap = overlap;
  d.sample_rate = g.room.sample_rate;
  d.mixture = std::move(mix.mixture);
  d.references = std::move(mix.references);
  if (geometry != nullptr) *geometry = g;
  return d;
}

DatasetSummary WriteDataset(const simulate::SceneRules& rules, int count, uint64_t master_seed,
                            const std::string& out_dir, const DatasetOptions& options, int threads) {
  if (count < 1) throw UsageError("dataset: scene count must be positive");
  rules.Validate();
  const fs::path root(out_dir);
  fs::create_directories(root / "scenes");
  fs::create_directories(root / "audio");
  std::vector<int> buckets(static_cast<size_t>(count));
  ParallelFor(static_cast<size_t>(count), threads, [&](size_t i) {
    simulate::SceneGeometry g;
    const SceneData d = SimulateScene(rules, master_seed, i, options, &g);
    buckets[i] = d.bucket;
    const std::string mix_name = d.id + "_mix.wav";
    io::WriteWav((root / "audio" / mix_name).string(), {d.sample_rate, d.mixture});
    std::vector<std::string> refs;
    for (size_t s = 0; s < d.references.size(); ++s) {
      const std::string name = d.id + "_s" + std::to_string(s + 1) + ".wav";
      io::WriteWav((root / "audio" / name).string(), {d.sample_rate, {d.references[s]}});
      refs.push_back("../audio/" + name);
    }
    json scene = io::SceneToJson(d.id, g, rules, options.mix.reference, "../audio/" + mix_name, refs);
    scene["overlap"] = d.overlap;
    WriteText(root / "scenes" / (d.id + ".json"), scene.dump(2) + "\n");
  });

  DatasetSummary summary;
  summary.index_path = (root / "index.json").string();
  const int num_buckets = static_cast<int>(rules.bucket_weights.size());
  for (int b = 0; b < num_buckets; ++b) summary.bucket_labels.push_back(rules.BucketLabel(b));
  summary.bucket_counts.assign(static_cast<size_t>(num_buckets), 0);
  json scenes = json::array();
  for (int i = 0; i < count; ++i) {
    ++summary.bucket_counts[static_cast<size_t>(buckets[static_cast<size_t>(i)])];
    scenes.push_back("scenes/" + SceneId(static_cast<uint64_t>(i)) + ".json");
  }
  const json index = {{"schema_version", io::kManifestSchemaVersion},
                      {"rules", rules.ToJson()},
                      {"master_seed", master_seed},
                      {"duration_s", options.duration_s},
                      {"overlap", {options.overlap.lo, options.overlap.hi}},
                      {"reference_kind", simulate::ReferenceKindName(options.mix.reference)},
                      {"bucket_labels", summary.bucket_labels},
                      {"bucket_counts", summary.bucket_counts},
                      {"scenes", scenes}};
  WriteText(summary.index_path, index.dump(2) + "\n");
  return summary;
}

SceneData LoadScene(const io::SceneRecord& record, int channels) {
  io::WavData mix = io::ReadWav(record.mixture_path);
  const int have = static_cast<int>(mix.channels.size());
  if (have < channels || (channels > 1 && have != channels)) {
    throw InputError("scene " + record.id + ": mixture has " + std::to_string(have) + " channels, model needs " +
                     std::to_string(channels));
  }
  if (mix.sample_rate != record.sample_rate) {
    throw InputError("scene " + record.id + ": mixture sample rate disagrees with manifest");
  }
  SceneData d;
  d.id = record.id;
  d.bucket = record.bucket;
  d.bucket_label = record.bucket_label;
  d.angle_difference_deg = record.angle_difference_deg;
  d.sample_rate = mix.sample_rate;
  mix.channels.resize(static_cast<size_t>(channels));
  d.mixture = std::move(mix.channels);
  for (const std::string& path : record.reference_paths) {
    io::WavData r = io::ReadWav(path);
    if (r.channels.size() != 1 || r.num_samples() != static_cast<size_t>(d.num_samples())) {
      throw InputError("scene " + record.id + ": reference " + path + " must be mono and match the mixture length");
    }
    d.references.push_back(std::move(r.channels[0]));
  }
  return d;
}

std::vector<SceneData> LoadScenes(const io::Manifest& manifest, int channels, int threads) {
  std::vector<SceneData> out(manifest.scenes.size());
  ParallelFor(out.size(), threads, [&](size_t i) { out[i] = LoadScene(manifest.scenes[i], channels); });
  return out;
}

namespace {

std::vector<double> Window(const std::vector<double>& x, int64_t start, int64_t length) {
  std::vector<double> out(static_cast<size_t>(length), 0.0);
  const auto n = static_cast<int64_t>(x.size());
  for (int64_t i = 0; i < length && start + i < n; ++i) out[static_cast<size_t>(i)] = x[static_cast<size_t>(start + i)];
  return out;
}

}  // namespace

Tensor MixtureTensor(const SceneData& scene, int channels, int64_t start, int64_t length) {
  if (channels > static_cast<int>(scene.mixture.size())) {
    throw InputError("scene " + scene.id + ": not enough mixture channels");
  }
  if (length < 0) length = scene.num_samples() - start;
  std::vector<double> data;
  data.reserve(static_cast<size_t>(channels * length));
  for (int c = 0; c < channels; ++c) {
    const auto w = Window(scene.mixture[static_cast<size_t>(c)], start, length);
    data.insert(data.end(), w.begin(), w.end());
  }
  return Tensor::FromData({channels, length}, std::move(data));
}

std::vector<Tensor> ReferenceTensors(const SceneData& scene, int64_t start, int64_t length) {
  if (length < 0) length = scene.num_samples() - start;
  std::vector<Tensor> out;
  for (const auto& r : scene.references) out.push_back(Tensor::FromData({length}, Window(r, start, length)));
  return out;
}

std::vector<Chunk> MakeChunks(const std::vector<SceneData>& scenes, int64_t chunk_samples,
                              int64_t hop_samples) {
  if (hop_samples == 0) hop_samples = chunk_samples;
  if (chunk_samples < 1 || hop_samples < 1) throw UsageError("chunks: chunk and hop must be positive");
  std::vector<Chunk> out;
  for (size_t s = 0; s < scenes.size(); ++s) {
    const int64_t t = scenes[s].num_samples();
    for (int64_t start = 0;; start += hop_samples) {
      const bool last = start + chunk_samples >= t;
      out.push_back({s, start, chunk_samples, start + chunk_samples > t});
      if (last) break;
    }
  }
  return out;
}

}  // namespace sepkit::pipeline
