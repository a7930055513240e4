// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <span>
#include <string>
#include <vector>

#include "sepkit/autodiff/tensor.h"

// Separation metrics, permutation-invariant losses, and ideal masks.
namespace sepkit::objectives {

using ad::Tensor;

// Log-ratio metrics saturate here instead of reaching +-inf.
inline constexpr double kMetricCapDb = 80.0;
inline constexpr double kMaskFloor = 1e-8;
inline constexpr double kIamClip = 10.0;

struct SdrDecomposition {
  double target_energy = 0.0;
  double noise_energy = 0.0;
};

// Projection of the estimate onto the reference. `zero_mean` removes the
// mean of both signals first (Si-SNR); SDR keeps them as they are.
SdrDecomposition Decompose(std::span<const double> estimate, std::span<const double> reference,
                           bool zero_mean);

// 10 log10(target / noise), saturated at +-kMetricCapDb.
double CappedRatioDb(double target_energy, double noise_energy);

double SiSnr(std::span<const double> estimate, std::span<const double> reference);
// Two-term projection SDR without mean removal.
double Sdr(std::span<const double> estimate, std::span<const double> reference);

// Differentiable Si-SNR in dB of a [T] estimate against a constant reference.
// Returns a constant when the value is beyond the cap.
Tensor SiSnrTensor(const Tensor& estimate, const Tensor& reference);

// mapping[s] = reference index assigned to estimate s (0-based).
struct PermutationAssignment {
  std::vector<int> mapping;
  double loss = 0.0;
};

// Exhaustive minimum of sum_s cost[s][mapping[s]] over all S! permutations.
// Ties resolve to the lexicographically smallest mapping.
PermutationAssignment BestPermutation(const std::vector<std::vector<double>>& cost);

struct UpitResult {
  PermutationAssignment assignment;
  Tensor loss;  // differentiable, equals assignment.loss
};

// -mean_s SiSnr(estimate_s, reference_mapping[s]).
UpitResult UpitNegSiSnr(const std::vector<Tensor>& estimates, const std::vector<Tensor>& references);

// (1/B) sum_s ||mask_s * |Y| - |X_mapping[s]|||^2 with B = T x F x S.
UpitResult UpitMse(const std::vector<Tensor>& masks, const Tensor& mixture_magnitude,
                   const std::vector<Tensor>& reference_magnitudes);

// Same criterion on already-masked estimates (complex planes, latents).
UpitResult UpitMseEstimates(const std::vector<Tensor>& estimates,
                            const std::vector<Tensor>& references);

enum class MaskType { kIam, kIbm, kIrm, kIpsm };

const char* MaskTypeName(MaskType type);
MaskType ParseMaskType(const std::string& name);

struct IdealMaskSet {
  std::vector<Tensor> iam;
  std::vector<Tensor> ibm;
  std::vector<Tensor> irm;
  std::vector<Tensor> ipsm;

  const std::vector<Tensor>& Get(MaskType type) const;
};

// All inputs [N x F]. Denominators are floored at kMaskFloor and IAM is
// clipped to [0, kIamClip]; IPSM is left unclipped.
IdealMaskSet IdealMasks(const std::vector<Tensor>& source_magnitudes,
                        const std::vector<Tensor>& source_phases, const Tensor& mixture_magnitude,
                        const Tensor& mixture_phase);

}  // namespace sepkit::objectives
