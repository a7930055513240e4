// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/objectives/objectives.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sepkit/autodiff/ops.h"
#include "sepkit/error.h"

namespace sepkit::objectives {
namespace {

double Mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

void CheckPair(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) {
    throw InputError("metric: estimate has " + std::to_string(estimate.size()) +
                     " samples, reference " + std::to_string(reference.size()));
  }
  if (reference.empty()) throw MetricError("metric: empty reference");
}

void CheckSourceCounts(size_t estimates, size_t references) {
  if (estimates != references) {
    throw InputError("upit: " + std::to_string(estimates) + " estimates but " +
                     std::to_string(references) + " references");
  }
  if (estimates == 0) throw InputError("upit: no sources");
  if (estimates > 6) throw InputError("upit: exhaustive search supports at most 6 sources");
}

}  // namespace

SdrDecomposition Decompose(std::span<const double> estimate, std::span<const double> reference,
                           bool zero_mean) {
  CheckPair(estimate, reference);
  const double me = zero_mean ? Mean(estimate) : 0.0;
  const double mr = zero_mean ? Mean(reference) : 0.0;
  double dot = 0.0, rr = 0.0, raw = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i] - mr;
    dot += (estimate[i] - me) * r;
    rr += r * r;
    raw += reference[i] * reference[i];
  }
  if (rr <= 1e-20 * std::max(raw, 1e-300)) {
    throw MetricError(zero_mean ? "metric: reference has zero variance"
                                : "metric: reference is all zeros");
  }
  const double alpha = dot / rr;
  SdrDecomposition d;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double target = alpha * (reference[i] - mr);
    const double noise = (estimate[i] - me) - target;
    d.target_energy += target * target;
    d.noise_energy += noise * noise;
  }
  return d;
}

double CappedRatioDb(double target_energy, double noise_energy) {
  if (noise_energy <= 0.0) return kMetricCapDb;
  if (target_energy <= 0.0) return -kMetricCapDb;
  const double db = 10.0 * std::log10(target_energy / noise_energy);
  return std::clamp(db, -kMetricCapDb, kMetricCapDb);
}

double SiSnr(std::span<const double> estimate, std::span<const double> reference) {
  const SdrDecomposition d = Decompose(estimate, reference, true);
  return CappedRatioDb(d.target_energy, d.noise_energy);
}

double Sdr(std::span<const double> estimate, std::span<const double> reference) {
  const SdrDecomposition d = Decompose(estimate, reference, false);
  return CappedRatioDb(d.target_energy, d.noise_energy);
}

Tensor SiSnrTensor(const Tensor& estimate, const Tensor& reference) {
  const double value = SiSnr(estimate.data(), reference.data());
  if (std::abs(value) >= kMetricCapDb) return Tensor::Scalar(value);
  const Tensor e = ad::Sub(estimate, ad::Mean(estimate));
  const Tensor r = ad::Sub(reference.Detach(), ad::Mean(reference.Detach()));
  const double rr = ad::Sum(ad::Square(r)).item();
  const Tensor target = ad::MulScalar(ad::Mul(r, ad::Sum(ad::Mul(e, r))), 1.0 / rr);
  const Tensor noise = ad::Sub(e, target);
  const Tensor ratio = ad::Div(ad::Sum(ad::Square(target)), ad::Sum(ad::Square(noise)));
  return ad::MulScalar(ad::Log(ratio), 10.0 / std::numbers::ln10);
}

PermutationAssignment BestPermutation(const std::vector<std::vector<double>>& cost) {
  const size_t s = cost.size();
  for (const auto& row : cost) {
    if (row.size() != s) throw InputError("upit: cost matrix is not square");
  }
  std::vector<int> perm(s);
  std::iota(perm.begin(), perm.end(), 0);
  PermutationAssignment best;
  bool first = true;
  do {
    double total = 0.0;
    for (size_t i = 0; i < s; ++i) total += cost[i][static_cast<size_t>(perm[i])];
    if (first || total < best.loss) {
      best.loss = total;
      best.mapping = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

UpitResult UpitNegSiSnr(const std::vector<Tensor>& estimates, const std::vector<Tensor>& references) {
  CheckSourceCounts(estimates.size(), references.size());
  const size_t s = estimates.size();
  const double inv = 1.0 / static_cast<double>(s);
  std::vector<std::vector<double>> cost(s, std::vector<double>(s));
  for (size_t i = 0; i < s; ++i)
    for (size_t j = 0; j < s; ++j) cost[i][j] = -SiSnr(estimates[i].data(), references[j].data()) * inv;
  UpitResult result{BestPermutation(cost), Tensor()};
  Tensor total;
  for (size_t i = 0; i < s; ++i) {
    const Tensor term = ad::MulScalar(
        SiSnrTensor(estimates[i], references[static_cast<size_t>(result.assignment.mapping[i])]), -inv);
    total = i == 0 ? term : ad::Add(total, term);
  }
  result.loss = total;
  return result;
}

UpitResult UpitMseEstimates(const std::vector<Tensor>& estimates,
                            const std::vector<Tensor>& references) {
  CheckSourceCounts(estimates.size(), references.size());
  const size_t s = estimates.size();
  for (size_t i = 0; i < s; ++i) {
    if (estimates[i].shape() != references[i].shape() || estimates[i].shape() != estimates[0].shape()) {
      throw DimensionError("upit: estimate " + ad::ShapeToString(estimates[i].shape()) +
                           " and reference " + ad::ShapeToString(references[i].shape()) +
                           " shapes differ");
    }
  }
  const double inv_bins = 1.0 / static_cast<double>(estimates[0].numel() * static_cast<int64_t>(s));
  std::vector<std::vector<double>> cost(s, std::vector<double>(s));
  for (size_t i = 0; i < s; ++i) {
    for (size_t j = 0; j < s; ++j) {
      std::span<const double> a = estimates[i].data(), b = references[j].data();
      double acc = 0.0;
      for (size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
      cost[i][j] = acc * inv_bins;
    }
  }
  UpitResult result{BestPermutation(cost), Tensor()};
  Tensor total;
  for (size_t i = 0; i < s; ++i) {
    const Tensor& ref = references[static_cast<size_t>(result.assignment.mapping[i])];
    const Tensor term = ad::MulScalar(ad::Sum(ad::Square(ad::Sub(estimates[i], ref))), inv_bins);
    total = i == 0 ? term : ad::Add(total, term);
  }
  result.loss = total;
  return result;
}

UpitResult UpitMse(const std::vector<Tensor>& masks, const Tensor& mixture_magnitude,
                   const std::vector<Tensor>& reference_magnitudes) {
  std::vector<Tensor> estimates;
  for (const Tensor& m : masks) {
    if (m.shape() != mixture_magnitude.shape()) {
      throw DimensionError("upit: mask " + ad::ShapeToString(m.shape()) + " does not match mixture " +
                           ad::ShapeToString(mixture_magnitude.shape()));
    }
    estimates.push_back(ad::Mul(m, mixture_magnitude));
  }
  return UpitMseEstimates(estimates, reference_magnitudes);
}

const char* MaskTypeName(MaskType type) {
  switch (type) {
    case MaskType::kIam: return "iam";
    case MaskType::kIbm: return "ibm";
    case MaskType::kIrm: return "irm";
    case MaskType::kIpsm: return "ipsm";
  }
  return "?";
}

MaskType ParseMaskType(const std::string& name) {
  if (name == "iam") return MaskType::kIam;
  if (name == "ibm") return MaskType::kIbm;
  if (name == "irm") return MaskType::kIrm;
  if (name == "ipsm") return MaskType::kIpsm;
  throw UsageError("unknown mask type '" + name + "'");
}

const std::vector<Tensor>& IdealMaskSet::Get(MaskType type) const {
  switch (type) {
    case MaskType::kIam: return iam;
    case MaskType::kIbm: return ibm;
    case MaskType::kIrm: return irm;
    case MaskType::kIpsm: return ipsm;
  }
  return iam;
}

IdealMaskSet IdealMasks(const std::vector<Tensor>& source_magnitudes,
                        const std::vector<Tensor>& source_phases, const Tensor& mixture_magnitude,
                        const Tensor& mixture_phase) {
  const size_t s = source_magnitudes.size();
  if (s < 2 || source_phases.size() != s) throw InputError("ideal masks: need at least two sources with phases");
  const ad::Shape& shape = mixture_magnitude.shape();
  for (size_t i = 0; i < s; ++i) {
    if (source_magnitudes[i].shape() != shape || source_phases[i].shape() != shape) {
      throw DimensionError("ideal masks: source " + std::to_string(i) + " does not match mixture " +
                           ad::ShapeToString(shape));
    }
  }
  if (mixture_phase.shape() != shape) throw DimensionError("ideal masks: mixture phase shape");
  const int64_t bins = mixture_magnitude.numel();
  IdealMaskSet out;
  for (size_t i = 0; i < s; ++i) {
    out.iam.push_back(Tensor::Zeros(shape));
    out.ibm.push_back(Tensor::Zeros(shape));
    out.irm.push_back(Tensor::Zeros(shape));
    out.ipsm.push_back(Tensor::Zeros(shape));
  }
  for (int64_t b = 0; b < bins; ++b) {
    const double y = std::max(mixture_magnitude[b], kMaskFloor);
    double total = 0.0;
    size_t loudest = 0;
    for (size_t i = 0; i < s; ++i) {
      const double m = source_magnitudes[i][b];
      if (m < 0.0) throw InputError("ideal masks: negative source magnitude");
      total += m;
      if (m > source_magnitudes[loudest][b]) loudest = i;
    }
    total = std::max(total, kMaskFloor);
    for (size_t i = 0; i < s; ++i) {
      const double m = source_magnitudes[i][b];
      out.iam[i].mutable_data()[b] = std::clamp(m / y, 0.0, kIamClip);
      out.ibm[i].mutable_data()[b] = i == loudest ? 1.0 : 0.0;
      out.irm[i].mutable_data()[b] = m / total;
      out.ipsm[i].mutable_data()[b] = m * std::cos(mixture_phase[b] - source_phases[i][b]) / y;
    }
  }
  return out;
}

}  // namespace sepkit::objectives
