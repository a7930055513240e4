// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "sepkit/codec/codec.h"
#include "sepkit/objectives/objectives.h"
#include "sepkit/pipeline/data.h"
#include "sepkit/pipeline/model.h"

namespace sepkit::pipeline {

struct SceneScore {
  std::string id;
  int bucket = 0;
  std::string bucket_label;
  double sisnr = 0.0;  // mean over sources, dB
  double sdr = 0.0;
  std::vector<int> mapping;  // mapping[s] = reference index for estimate s
  std::vector<double> source_sisnr;
  std::vector<double> source_sdr;
};

// Picks the estimate-to-reference assignment with the highest mean Si-SNR,
// then reports Si-SNR and SDR under that assignment.
SceneScore ScoreScene(const SceneData& scene, const std::vector<std::vector<double>>& estimates);

struct ScoreSummary {
  std::vector<std::string> labels;
  std::vector<int> counts;
  std::vector<double> sisnr;  // per-bucket means; NaN for empty buckets
  std::vector<double> sdr;
  int total = 0;
  double avg_sisnr = 0.0;  // mean over all scenes
  double avg_sdr = 0.0;
};

ScoreSummary Summarize(const std::vector<SceneScore>& scores, const std::vector<std::string>& labels);

// Full-utterance separation of one scene, S waveforms of the mixture length.
std::vector<std::vector<double>> Separate(Model& model, const Tensor& mixture);

std::vector<SceneScore> EvaluateModel(Model& model, const std::vector<SceneData>& scenes, int threads);

// Ideal-mask estimates on mic 1: the mask multiplies both planes of the
// mixture STFT, which keeps the mixture phase.
std::vector<std::vector<double>> OracleEstimates(const SceneData& scene, objectives::MaskType type,
                                                 const codec::CodecConfig& stft);

std::vector<SceneScore> EvaluateOracle(const std::vector<SceneData>& scenes, objectives::MaskType type,
                                       const codec::CodecConfig& stft, int threads);

// CSV columns: row_type,id,bucket,count,sisnr_db,sdr_db,mapping. row_type is
// "scene", "bucket" or "avg"; mapping lists 1-based reference indices.
void WriteScoresCsv(std::ostream& out, const std::vector<SceneScore>& scores, const ScoreSummary& summary);

// Human-readable bucket table.
void PrintSummary(std::ostream& out, const ScoreSummary& summary, const std::string& title);

}  // namespace sepkit::pipeline
