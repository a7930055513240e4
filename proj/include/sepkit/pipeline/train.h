// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sepkit/pipeline/data.h"
#include "sepkit/pipeline/model.h"
#include "sepkit/separator/checkpoint.h"

namespace sepkit::pipeline {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double lr = 0.0;
  int64_t steps = 0;  // total steps after this epoch
};

struct TrainerState {
  int epoch = 0;  // completed epochs
  int64_t step = 0;
  double lr = 0.0;
  double best_valid = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stagnant = 0;    // epochs without improvement since the last lr change
  int since_best = 0;  // epochs without improvement, for early stopping
  std::vector<EpochRecord> history;
};

TrainerState InitialState(const ExperimentConfig& config);

struct StepInfo {
  int epoch = 0;  // 1-based
  int64_t step = 0;
  size_t chunk_index = 0;
  double loss = 0.0;
};

struct TrainOptions {
  int64_t max_steps = 0;  // 0: no limit
  // Writes best.ckpt (f32 weights) and last.ckpt (f64, resumable) here when
  // non-empty.
  std::string checkpoint_dir;
  // Return false to stop after the current step.
  std::function<bool(const StepInfo&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  int threads = 1;
};

struct TrainResult {
  std::string stop_reason;  // "max_epochs", "early_stop", "max_steps", "callback"
};

// Runs epochs config.max_epochs - state.epoch more epochs at most. Each
// epoch visits every chunk of `train` once in an order fixed by
// (config.seed, epoch). Validation uses whole scenes of `valid` (or `train`
// when `valid` is empty). Throws NumericError naming the epoch and chunk
// when the loss or a gradient turns non-finite.
TrainResult Train(Model& model, TrainerState& state, const std::vector<SceneData>& train,
                  const std::vector<SceneData>& valid, const TrainOptions& options);

// Mean loss over whole scenes, inference mode.
double EvaluateLoss(Model& model, const std::vector<SceneData>& scenes, int threads);

enum class CheckpointKind { kWeights, kTraining };

// kWeights stores f32 parameters; kTraining stores f64 parameters plus Adam
// moments and trainer state, enough to resume bit-identically.
void SaveCheckpoint(const std::string& path, Model& model, const TrainerState& state, CheckpointKind kind);

struct LoadedCheckpoint {
  ExperimentConfig config;
  TrainerState state;
  bool has_optimizer = false;
};

// Reads the config stored in a checkpoint.
LoadedCheckpoint ReadCheckpointHeader(const std::string& path);
// Restores weights (and optimizer state when present) into `model`. Throws
// ConfigError when the checkpoint was written for a different model.
LoadedCheckpoint LoadCheckpoint(const std::string& path, Model& model);

}  // namespace sepkit::pipeline
