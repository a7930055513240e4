// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/pipeline/model.h"

#include <algorithm>

#include "sepkit/autodiff/ops.h"
#include "sepkit/error.h"
#include "sepkit/spatial/spatial.h"

namespace sepkit::pipeline {
namespace {

codec::KernelBank MakeBank(const ExperimentConfig& c, uint64_t seed) {
  if (c.pipeline == PipelineKind::kWaveform) return codec::KernelBank::Learned(c.codec, seed ^ 0xC0DECULL);
  return codec::KernelBank::Stft(c.codec);
}

ExperimentConfig Finalized(ExperimentConfig c) {
  c.Finalize();
  return c;
}

}  // namespace

Model::Model(const ExperimentConfig& config, uint64_t seed)
    : config_(Finalized(config)), bank_(MakeBank(config_, seed)), tcn_(config_.tcn, seed) {
  ipd_config_ = codec::CodecConfig::Spectrogram(config_.IpdLength(), config_.codec.hop);
  ipd_config_.sample_rate = config_.codec.sample_rate;
  if (config_.channels > 1 && config_.pipeline == PipelineKind::kWaveform) {
    ipd_bank_ = codec::KernelBank::Stft(ipd_config_);
  }
}

Tensor PadForCodec(const Tensor& mixture, const codec::CodecConfig& config, int64_t* left) {
  const int64_t len = config.length;
  const int64_t hop = config.hop;
  const int64_t t = mixture.dim(mixture.ndim() - 1);
  *left = len - hop;
  const int64_t base = t + 2 * (len - hop);
  const int64_t align = ((base - len) % hop + hop) % hop;
  const int64_t right = (len - hop) + (align == 0 ? 0 : hop - align);
  return ad::PadLast(mixture, *left, right);
}

ModelOutput Model::Forward(const Tensor& mixture, bool training) {
  if (mixture.ndim() != 2 || mixture.dim(0) != config_.channels) {
    throw DimensionError("model: mixture must be [" + std::to_string(config_.channels) + " x T], got " +
                         ad::ShapeToString(mixture.shape()));
  }
  const int64_t t = mixture.dim(1);
  int64_t left = 0;
  const Tensor x = PadForCodec(mixture, config_.codec, &left);
  const int64_t padded = x.dim(1);
  const Tensor ref = ad::Reshape(ad::SliceRows(x, 0, 1), {padded});
  const int64_t n = config_.codec.filters;

  auto with_ipd = [&](const Tensor& primary, int64_t frames) {
    if (config_.channels <= 1) return primary;
    if (!ipd_bank_) {
      return spatial::AssembleFeatures(primary,
                                       spatial::IpdFromWaveform(x, bank_, config_.codec, config_.pairs, frames));
    }
    // A longer IPD window is centred on the encoder frames.
    const int64_t extra = (config_.IpdLength() - config_.codec.length) / 2;
    const Tensor xi = extra > 0 ? ad::PadLast(x, extra, extra) : x;
    const spatial::SpatialFeatures sf = spatial::IpdFromWaveform(xi, *ipd_bank_, ipd_config_, config_.pairs, frames);
    return spatial::AssembleFeatures(primary, sf);
  };

  ModelOutput out;
  switch (config_.pipeline) {
    case PipelineKind::kMagnitude: {
      const codec::ComplexFrames y = codec::Encode(ref, bank_, config_.codec);
      const codec::Polar polar = codec::MagnitudePhase(y);
      out.masks = tcn_.Forward(with_ipd(polar.magnitude, polar.magnitude.dim(1)), training);
      for (const Tensor& m : out.masks) {
        Tensor masked = ad::Mul(m, polar.magnitude);
        out.masked.push_back(masked);
        const codec::ComplexFrames est = codec::ReconstructComplex(masked, polar.phase);
        out.waveforms.push_back(ad::SliceLast(codec::Decode(est, bank_, config_.codec, padded), left, t));
      }
      break;
    }
    case PipelineKind::kComplex: {
      const codec::ComplexFrames y = codec::Encode(ref, bank_, config_.codec);
      const Tensor planes[] = {y.re, y.im};
      out.masks = tcn_.Forward(with_ipd(ad::Concat(planes), y.re.dim(1)), training);
      for (const Tensor& m : out.masks) {
        codec::ComplexFrames est{ad::Mul(ad::SliceRows(m, 0, n), y.re), ad::Mul(ad::SliceRows(m, n, n), y.im)};
        const Tensor stacked[] = {est.re, est.im};
        out.masked.push_back(ad::Concat(stacked));
        out.waveforms.push_back(ad::SliceLast(codec::Decode(est, bank_, config_.codec, padded), left, t));
      }
      break;
    }
    case PipelineKind::kWaveform: {
      const Tensor latent = codec::EncodeLatent(ref, bank_, config_.codec);
      out.masks = tcn_.Forward(with_ipd(latent, latent.dim(1)), training);
      for (const Tensor& m : out.masks) {
        Tensor masked = ad::Mul(m, latent);
        out.masked.push_back(masked);
        out.waveforms.push_back(
            ad::SliceLast(codec::DecodeLatent(masked, bank_, config_.codec, padded), left, t));
      }
      break;
    }
  }
  return out;
}

Tensor Model::TargetRepresentation(const Tensor& reference) {
  int64_t left = 0;
  const Tensor x = PadForCodec(reference.Detach(), config_.codec, &left);
  switch (config_.pipeline) {
    case PipelineKind::kMagnitude:
      return codec::MagnitudePhase(codec::Encode(x, bank_, config_.codec)).magnitude;
    case PipelineKind::kComplex: {
      const codec::ComplexFrames y = codec::Encode(x, bank_, config_.codec);
      const Tensor planes[] = {y.re, y.im};
      return ad::Concat(planes);
    }
    case PipelineKind::kWaveform:
      return codec::EncodeLatent(x, bank_, config_.codec);
  }
  return {};
}

objectives::UpitResult Model::Loss(const ModelOutput& out, const std::vector<Tensor>& references) {
  if (config_.loss == LossKind::kUpitSiSnr) return objectives::UpitNegSiSnr(out.waveforms, references);
  std::vector<Tensor> targets;
  targets.reserve(references.size());
  for (const Tensor& r : references) targets.push_back(TargetRepresentation(r));
  return objectives::UpitMseEstimates(out.masked, targets);
}

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out = bank_.parameters();
  for (ad::Parameter* p : tcn_.parameters()) out.push_back(p);
  return out;
}

void Model::ExportWeights(separator::TensorArchive& archive) {
  for (ad::Parameter* p : parameters()) {
    archive.Put(p->name, p->value.shape(), p->value.values());
  }
  for (auto& ns : tcn_.norm_states()) {
    const auto c = static_cast<int64_t>(ns.state.running_mean.size());
    if (c == 0) continue;
    archive.Put(ns.name + ".running_mean", {c}, ns.state.running_mean);
    archive.Put(ns.name + ".running_var", {c}, ns.state.running_var);
  }
}

void Model::ImportWeights(const separator::TensorArchive& archive) {
  auto fetch = [&](const std::string& name, const ad::Shape& shape) -> const separator::NamedTensor& {
    const separator::NamedTensor* t = archive.Find(name);
    if (t == nullptr) throw FormatError("checkpoint: missing tensor '" + name + "'");
    if (t->shape != shape) {
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + ad::ShapeToString(t->shape) +
                        ", model expects " + ad::ShapeToString(shape));
    }
    return *t;
  };
  for (ad::Parameter* p : parameters()) {
    const auto& t = fetch(p->name, p->value.shape());
    std::copy(t.data.begin(), t.data.end(), p->value.mutable_data().begin());
  }
  for (auto& ns : tcn_.norm_states()) {
    const separator::NamedTensor* mean = archive.Find(ns.name + ".running_mean");
    if (mean == nullptr) continue;
    const auto& var = fetch(ns.name + ".running_var", mean->shape);
    ns.state.running_mean = mean->data;
    ns.state.running_var = var.data;
  }
}

}  // namespace sepkit::pipeline
