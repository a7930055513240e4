// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sepkit/pipeline/config.h"

namespace sepkit::pipeline {

struct RfRow {
  separator::Causality mode = separator::Causality::kNonCausal;
  int64_t table_frames = 0;
  double table_seconds = 0.0;
  int64_t exact_frames = 0;
  double exact_seconds = 0.0;
  int64_t lookahead_frames = 0;
  double lookahead_seconds = 0.0;
};

// Receptive field and lookahead of the config's TCN under every causality
// mode, at the codec hop and sample rate.
std::vector<RfRow> RfTable(const ExperimentConfig& config);

// X=2, R=1, H=8, B=8, L=16, hop 8, two sources; spectrogram pipelines use a
// trainable window so the codec is covered by gradient checks.
ExperimentConfig TinyConfig(PipelineKind pipeline, LossKind loss, int channels = 1);

struct GradGroupResult {
  std::string pipeline;
  std::string loss;
  int channels = 1;
  std::string group;  // "codec", "tcn.input_norm", "tcn.bottleneck", "tcn.blocks", "tcn.out"
  double max_rel_error = 0.0;
  int64_t checked = 0;
};

struct GradSuiteOptions {
  double step = 1e-6;
  int64_t coords_per_tensor = 6;  // 0: every coordinate
  int64_t samples = 96;
  uint64_t seed = 0;
};

// Central finite differences against tape gradients for every parameter of
// each config, on a random two-source mixture; one row per parameter group.
std::vector<GradGroupResult> RunGradientSuite(const std::vector<ExperimentConfig>& configs,
                                              const GradSuiteOptions& options);

}  // namespace sepkit::pipeline
