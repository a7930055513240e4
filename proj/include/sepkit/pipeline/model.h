// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sepkit/autodiff/tensor.h"
#include "sepkit/codec/codec.h"
#include "sepkit/objectives/objectives.h"
#include "sepkit/pipeline/config.h"
#include "sepkit/separator/checkpoint.h"
#include "sepkit/separator/tcn.h"

namespace sepkit::pipeline {

using ad::Tensor;

struct ModelOutput {
  std::vector<Tensor> waveforms;  // S x [T]
  std::vector<Tensor> masks;      // S x [MaskRows x F]
  // Masked mixture in the domain the MSE objective compares:
  // magnitude |Y|, stacked [re; im], or the encoder latent.
  std::vector<Tensor> masked;
};

// Zero-pads [.. x T] along time so that every sample lies under a full set
// of overlapping frames; decoded signals are cropped back with
// SliceLast(y, *left, T).
Tensor PadForCodec(const Tensor& x, const codec::CodecConfig& config, int64_t* left);

// Encoder, optional IPD features, TCN mask estimator and decoder for one of
// the three pipelines.
class Model {
 public:
  Model(const ExperimentConfig& config, uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ExperimentConfig& config() const { return config_; }

  // mixture [C x T] with C == config.channels; channel 0 is the reference
  // microphone.
  ModelOutput Forward(const Tensor& mixture, bool training);

  // Clean reference [T] in the MSE comparison domain. The target goes
  // through the same (possibly trainable) encoder and stays on the tape.
  Tensor TargetRepresentation(const Tensor& reference);

  // Utterance-level PIT loss for the configured objective.
  objectives::UpitResult Loss(const ModelOutput& out, const std::vector<Tensor>& references);

  std::vector<ad::Parameter*> parameters();
  separator::Tcn& tcn() { return tcn_; }
  codec::KernelBank& bank() { return bank_; }

  // Weights (and batch-norm running statistics) as named tensors.
  void ExportWeights(separator::TensorArchive& archive);
  // Throws FormatError when a tensor is missing or has the wrong shape.
  void ImportWeights(const separator::TensorArchive& archive);

 private:
  ExperimentConfig config_;
  codec::KernelBank bank_;
  // Fixed Hann STFT for IPD features in the waveform pipeline.
  std::optional<codec::KernelBank> ipd_bank_;
  codec::CodecConfig ipd_config_;
  separator::Tcn tcn_;
};

}  // namespace sepkit::pipeline
