// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "sepkit/codec/codec.h"
#include "sepkit/separator/tcn.h"
#include "sepkit/spatial/spatial.h"

namespace sepkit::pipeline {

enum class PipelineKind { kMagnitude, kComplex, kWaveform };
enum class LossKind { kUpitMse, kUpitSiSnr };

const char* PipelineName(PipelineKind kind);
const char* LossName(LossKind kind);

struct ExperimentConfig {
  PipelineKind pipeline = PipelineKind::kMagnitude;
  int channels = 1;
  spatial::PairSet pairs;  // used when channels > 1
  codec::CodecConfig codec = codec::CodecConfig::Spectrogram(512, 160);
  // Window of the IPD STFT (waveform pipeline only; 0 means codec.length).
  // It runs at the encoder hop and is centred on the encoder frames.
  int64_t ipd_length = 0;
  // N and input_width are derived from the pipeline; the rest comes from
  // the config file.
  separator::TcnConfig tcn;
  LossKind loss = LossKind::kUpitSiSnr;
  double chunk_s = 4.0;
  double lr = 1e-3;
  int max_epochs = 100;
  int lr_patience = 3;           // halve lr after this many stagnant epochs
  int early_stop_patience = 10;  // 0 disables
  uint64_t seed = 0;
  std::string train_manifest;
  std::string valid_manifest;

  // Window and bins of the STFT used for IPD features.
  int64_t IpdLength() const { return ipd_length > 0 ? ipd_length : codec.length; }
  int64_t IpdBins() const;
  // Feature rows entering the separator.
  int64_t InputWidth() const;
  // Mask rows per source.
  int64_t MaskRows() const;

  // Fills tcn.N / tcn.input_width and checks cross-field invariants.
  void Finalize();

  // Relative manifest paths are resolved against base_dir.
  static ExperimentConfig FromJson(const nlohmann::json& j, const std::string& base_dir = "");
  static ExperimentConfig Load(const std::string& path);
  nlohmann::json ToJson() const;

  // FNV-1a over the model-defining fields; checkpoints carry it.
  uint64_t ModelHash() const;
};

}  // namespace sepkit::pipeline
