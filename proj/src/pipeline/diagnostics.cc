// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/pipeline/diagnostics.h"

#include <algorithm>
#include <map>
#include <random>

#include "sepkit/autodiff/gradcheck.h"
#include "sepkit/pipeline/data.h"
#include "sepkit/pipeline/model.h"

namespace sepkit::pipeline {
namespace {

std::string GroupOf(const std::string& name) {
  if (name.rfind("codec.", 0) == 0) return "codec";
  if (name.rfind("tcn.block", 0) == 0) return "tcn.blocks";
  const size_t second = name.find('.', name.find('.') + 1);
  return name.substr(0, second);
}

}  // namespace

std::vector<RfRow> RfTable(const ExperimentConfig& config) {
  std::vector<RfRow> rows;
  for (auto mode : {separator::Causality::kNonCausal, separator::Causality::kSemiCausal,
                    separator::Causality::kCausal}) {
    separator::TcnConfig t = config.tcn;
    t.causality = mode;
    const auto rf = separator::ComputeReceptiveField(t, config.codec.hop, config.codec.sample_rate);
    RfRow r;
    r.mode = mode;
    r.table_frames = rf.table_frames;
    r.table_seconds = rf.table_seconds;
    r.exact_frames = rf.exact_frames;
    r.exact_seconds = rf.exact_seconds;
    r.lookahead_frames = separator::LookaheadFrames(t);
    r.lookahead_seconds = separator::LookaheadSeconds(t, config.codec.hop, config.codec.sample_rate);
    rows.push_back(r);
  }
  return rows;
}

ExperimentConfig TinyConfig(PipelineKind pipeline, LossKind loss, int channels) {
  ExperimentConfig c;
  c.pipeline = pipeline;
  c.loss = loss;
  c.channels = channels;
  c.codec = pipeline == PipelineKind::kWaveform ? codec::CodecConfig::Waveform(16, 9, 8)
                                                 : codec::CodecConfig::Spectrogram(16, 8, codec::WindowMode::kTrainable);
  c.tcn.B = 8;
  c.tcn.H = 8;
  c.tcn.P = 3;
  c.tcn.X = 2;
  c.tcn.R = 1;
  c.Finalize();
  return c;
}

std::vector<GradGroupResult> RunGradientSuite(const std::vector<ExperimentConfig>& configs,
                                              const GradSuiteOptions& options) {
  std::vector<GradGroupResult> out;
  for (const ExperimentConfig& cfg : configs) {
    Model model(cfg, options.seed + 1);
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    SceneData scene;
    scene.id = "gradcheck";
    for (int64_t s = 0; s < cfg.tcn.S; ++s) {
      std::vector<double> x(static_cast<size_t>(options.samples));
      for (double& v : x) v = noise(rng);
      scene.references.push_back(std::move(x));
    }
    // Channel c hears source s delayed by c * s samples.
    for (int c = 0; c < cfg.channels; ++c) {
      std::vector<double> m(static_cast<size_t>(options.samples), 0.0);
      for (size_t s = 0; s < scene.references.size(); ++s) {
        const auto d = static_cast<size_t>(c) * s;
        for (size_t i = d; i < m.size(); ++i) m[i] += scene.references[s][i - d];
      }
      scene.mixture.push_back(std::move(m));
    }
    const Tensor mix = MixtureTensor(scene, cfg.channels);
    const std::vector<Tensor> refs = ReferenceTensors(scene);
    auto loss_fn = [&] { return model.Loss(model.Forward(mix, true), refs).loss; };

    std::map<std::string, GradGroupResult> groups;
    std::vector<std::string> order;
    for (ad::Parameter* p : model.parameters()) {
      ad::GradCheckOptions go;
      go.step = options.step;
      go.max_coords = options.coords_per_tensor;
      go.seed = options.seed;
      const ad::GradCheckResult r = ad::CheckGradient(loss_fn, p->value, go);
      const std::string g = GroupOf(p->name);
      if (!groups.count(g)) {
        order.push_back(g);
        groups[g] = {PipelineName(cfg.pipeline), LossName(cfg.loss), cfg.channels, g, 0.0, 0};
      }
      groups[g].max_rel_error = std::max(groups[g].max_rel_error, r.max_rel_error);
      groups[g].checked += r.checked;
    }
    for (const auto& g : order) out.push_back(groups[g]);
  }
  return out;
}

}  // namespace sepkit::pipeline
