// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/pipeline/evaluate.h"

#include <cmath>
#include <cstdio>
#include <limits>

#include "sepkit/autodiff/ops.h"
#include "sepkit/error.h"
#include "sepkit/pipeline/parallel.h"

namespace sepkit::pipeline {
namespace {

std::string Fixed(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  return buf;
}

}  // namespace

SceneScore ScoreScene(const SceneData& scene, const std::vector<std::vector<double>>& estimates) {
  const size_t s_count = scene.references.size();
  if (estimates.size() != s_count) {
    throw InputError("scene " + scene.id + ": " + std::to_string(estimates.size()) + " estimates for " +
                     std::to_string(s_count) + " references");
  }
  std::vector<std::vector<double>> sisnr(s_count, std::vector<double>(s_count));
  std::vector<std::vector<double>> cost(s_count, std::vector<double>(s_count));
  try {
    for (size_t e = 0; e < s_count; ++e) {
      for (size_t r = 0; r < s_count; ++r) {
        sisnr[e][r] = objectives::SiSnr(estimates[e], scene.references[r]);
        cost[e][r] = -sisnr[e][r];
      }
    }
  } catch (const MetricError& err) {
    throw MetricError("scene " + scene.id + ": " + err.what());
  }
  const objectives::PermutationAssignment best = objectives::BestPermutation(cost);
  SceneScore out;
  out.id = scene.id;
  out.bucket = scene.bucket;
  out.bucket_label = scene.bucket_label;
  for (size_t e = 0; e < s_count; ++e) {
    const auto r = static_cast<size_t>(best.mapping[e]);
    out.mapping.push_back(best.mapping[e]);
    out.source_sisnr.push_back(sisnr[e][r]);
    out.source_sdr.push_back(objectives::Sdr(estimates[e], scene.references[r]));
    out.sisnr += out.source_sisnr.back() / static_cast<double>(s_count);
    out.sdr += out.source_sdr.back() / static_cast<double>(s_count);
  }
  return out;
}

ScoreSummary Summarize(const std::vector<SceneScore>& scores, const std::vector<std::string>& labels) {
  ScoreSummary s;
  s.labels = labels;
  s.counts.assign(labels.size(), 0);
  s.sisnr.assign(labels.size(), 0.0);
  s.sdr.assign(labels.size(), 0.0);
  for (const SceneScore& sc : scores) {
    if (sc.bucket < 0 || sc.bucket >= static_cast<int>(labels.size())) {
      throw InputError("scores: scene " + sc.id + " has bucket outside the label list");
    }
    const auto b = static_cast<size_t>(sc.bucket);
    ++s.counts[b];
    s.sisnr[b] += sc.sisnr;
    s.sdr[b] += sc.sdr;
    s.avg_sisnr += sc.sisnr;
    s.avg_sdr += sc.sdr;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t b = 0; b < labels.size(); ++b) {
    s.sisnr[b] = s.counts[b] ? s.sisnr[b] / s.counts[b] : nan;
    s.sdr[b] = s.counts[b] ? s.sdr[b] / s.counts[b] : nan;
  }
  s.total = static_cast<int>(scores.size());
  s.avg_sisnr = s.total ? s.avg_sisnr / s.total : nan;
  s.avg_sdr = s.total ? s.avg_sdr / s.total : nan;
  return s;
}

std::vector<std::vector<double>> Separate(Model& model, const Tensor& mixture) {
  const ModelOutput out = model.Forward(mixture, false);
  std::vector<std::vector<double>> waves;
  for (const Tensor& w : out.waveforms) waves.emplace_back(w.data().begin(), w.data().end());
  return waves;
}

std::vector<SceneScore> EvaluateModel(Model& model, const std::vector<SceneData>& scenes, int threads) {
  std::vector<SceneScore> scores(scenes.size());
  const int channels = model.config().channels;
  ParallelFor(scenes.size(), threads, [&](size_t i) {
    scores[i] = ScoreScene(scenes[i], Separate(model, MixtureTensor(scenes[i], channels)));
  });
  return scores;
}

std::vector<std::vector<double>> OracleEstimates(const SceneData& scene, objectives::MaskType type,
                                                 const codec::CodecConfig& stft) {
  const codec::KernelBank bank = codec::KernelBank::Stft(stft);
  const int64_t t = scene.num_samples();
  int64_t left = 0;
  auto encode = [&](const std::vector<double>& x) {
    return codec::Encode(PadForCodec(Tensor::FromData({t}, x), stft, &left), bank, stft);
  };
  const codec::ComplexFrames y = encode(scene.mixture.at(0));
  const codec::Polar mix = codec::MagnitudePhase(y);
  std::vector<Tensor> mags, phases;
  for (const auto& r : scene.references) {
    const codec::Polar p = codec::MagnitudePhase(encode(r));
    mags.push_back(p.magnitude);
    phases.push_back(p.phase);
  }
  // A single-source scene is treated as that source plus a silent one.
  if (mags.size() == 1) {
    mags.push_back(Tensor::Zeros(mix.magnitude.shape()));
    phases.push_back(Tensor::Zeros(mix.magnitude.shape()));
  }
  const objectives::IdealMaskSet masks = objectives::IdealMasks(mags, phases, mix.magnitude, mix.phase);
  const int64_t padded = y.re.dim(1) == 0 ? 0 : (y.re.dim(1) - 1) * stft.hop + stft.length;
  std::vector<std::vector<double>> out;
  for (size_t i = 0; i < scene.references.size(); ++i) {
    const Tensor& m = masks.Get(type)[i];
    const codec::ComplexFrames est{ad::Mul(m, y.re), ad::Mul(m, y.im)};
    const Tensor w = ad::SliceLast(codec::Decode(est, bank, stft, padded), left, t);
    out.emplace_back(w.data().begin(), w.data().end());
  }
  return out;
}

std::vector<SceneScore> EvaluateOracle(const std::vector<SceneData>& scenes, objectives::MaskType type,
                                       const codec::CodecConfig& stft, int threads) {
  std::vector<SceneScore> scores(scenes.size());
  ParallelFor(scenes.size(), threads,
              [&](size_t i) { scores[i] = ScoreScene(scenes[i], OracleEstimates(scenes[i], type, stft)); });
  return scores;
}

void WriteScoresCsv(std::ostream& out, const std::vector<SceneScore>& scores, const ScoreSummary& summary) {
  out << "row_type,id,bucket,count,sisnr_db,sdr_db,mapping\n";
  for (const SceneScore& s : scores) {
    std::string mapping;
    for (size_t i = 0; i < s.mapping.size(); ++i) mapping += (i ? " " : "") + std::to_string(s.mapping[i] + 1);
    out << "scene," << s.id << ',' << s.bucket_label << ",1," << Fixed(s.sisnr) << ',' << Fixed(s.sdr) << ','
        << mapping << '\n';
  }
  for (size_t b = 0; b < summary.labels.size(); ++b) {
    out << "bucket,," << summary.labels[b] << ',' << summary.counts[b] << ',' << Fixed(summary.sisnr[b]) << ','
        << Fixed(summary.sdr[b]) << ",\n";
  }
  out << "avg,,AVG," << summary.total << ',' << Fixed(summary.avg_sisnr) << ',' << Fixed(summary.avg_sdr)
      << ",\n";
}

void PrintSummary(std::ostream& out, const ScoreSummary& summary, const std::string& title) {
  char line[160];
  out << title << '\n';
  std::snprintf(line, sizeof(line), "  %-10s %6s %10s %10s\n", "bucket", "count", "Si-SNR", "SDR");
  out << line;
  for (size_t b = 0; b < summary.labels.size(); ++b) {
    std::snprintf(line, sizeof(line), "  %-10s %6d %10.2f %10.2f\n", summary.labels[b].c_str(), summary.counts[b],
                  summary.sisnr[b], summary.sdr[b]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "  %-10s %6d %10.2f %10.2f\n", "AVG", summary.total, summary.avg_sisnr,
                summary.avg_sdr);
  out << line;
}

}  // namespace sepkit::pipeline
