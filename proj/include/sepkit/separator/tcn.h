// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "sepkit/autodiff/ops.h"
#include "sepkit/autodiff/optim.h"
#include "sepkit/autodiff/tensor.h"

namespace sepkit::separator {

using ad::Tensor;

enum class Causality { kNonCausal, kCausal, kSemiCausal };
enum class MaskActivation { kRelu, kSigmoid, kLinear };

struct TcnConfig {
  int64_t N = 257;  // mask rows per source
  int64_t B = 256;  // bottleneck channels
  int64_t H = 512;  // block hidden channels
  int64_t P = 3;
  int64_t X = 8;
  int64_t R = 4;
  ad::NormKind norm = ad::NormKind::kGlobalLayer;
  Causality causality = Causality::kNonCausal;
  int64_t S = 2;
  int64_t input_width = 257;
  MaskActivation mask_activation = MaskActivation::kRelu;

  void Validate() const;
};

struct BlockPadding {
  int64_t dilation = 1;
  int64_t pad_left = 0;
  int64_t pad_right = 0;
  bool operator==(const BlockPadding&) const = default;
};

// One entry per ConvBlock, repeats outermost.
std::vector<BlockPadding> DilationSchedule(const TcnConfig& config);

struct ReceptiveField {
  int64_t exact_frames = 0;  // 1 + sum over blocks of (P-1) d
  int64_t table_frames = 0;  // 2^(X+1) R, the convention of published tables
  double exact_seconds = 0.0;
  double table_seconds = 0.0;
};

ReceptiveField ComputeReceptiveField(const TcnConfig& config, int64_t hop, int sample_rate);

// Future frames visible to one output frame, from the padding schedule.
int64_t LookaheadFrames(const TcnConfig& config);
double LookaheadSeconds(const TcnConfig& config, int64_t hop, int sample_rate);

const char* CausalityName(Causality c);
Causality ParseCausality(const std::string& name);
const char* NormName(ad::NormKind kind);
ad::NormKind ParseNorm(const std::string& name);
const char* MaskActivationName(MaskActivation a);
MaskActivation ParseMaskActivation(const std::string& name);

// Temporal convolutional mask estimator:
//   cLN -> 1x1 conv to B -> R x X ConvBlocks -> PReLU -> 1x1 conv to S*N
//   -> mask activation -> S masks [N x F].
// ConvBlock: 1x1 conv to H, PReLU, norm, depthwise conv (P, dilation),
// PReLU, norm, 1x1 conv back to B, plus the block input.
class Tcn {
 public:
  Tcn(const TcnConfig& config, uint64_t seed);
  // Blocks hold pointers into the parameter store; moves keep them valid.
  Tcn(const Tcn&) = delete;
  Tcn& operator=(const Tcn&) = delete;
  Tcn(Tcn&&) = default;
  Tcn& operator=(Tcn&&) = default;

  const TcnConfig& config() const { return config_; }

  // features [input_width x F] -> S tensors of [N x F].
  std::vector<Tensor> Forward(const Tensor& features, bool training);

  // Bottleneck representation after the residual blocks, before the output
  // PReLU; exposed for structural tests.
  Tensor Trunk(const Tensor& features, bool training);

  std::vector<ad::Parameter*> parameters();
  ad::Parameter* FindParameter(const std::string& name);

  // Batch-norm running statistics, one entry per norm layer.
  struct NormState {
    std::string name;
    ad::BatchNormState state;
  };
  std::deque<NormState>& norm_states() { return norm_states_; }

 private:
  struct Norm {
    ad::Parameter* scale = nullptr;
    ad::Parameter* shift = nullptr;
    ad::BatchNormState* state = nullptr;
  };
  struct Block {
    ad::Parameter* in_w;
    ad::Parameter* in_b;
    ad::Parameter* prelu1;
    Norm norm1;
    ad::Parameter* dw_w;
    ad::Parameter* dw_b;
    ad::Parameter* prelu2;
    Norm norm2;
    ad::Parameter* out_w;
    ad::Parameter* out_b;
    BlockPadding pad;
  };

  ad::Parameter* Add(const std::string& name, Tensor init);
  Norm MakeNorm(const std::string& prefix, int64_t channels);
  Tensor ApplyNorm(const Tensor& x, const Norm& n, ad::NormKind kind, bool training);

  TcnConfig config_;
  std::deque<ad::Parameter> params_;
  std::deque<NormState> norm_states_;
  Norm input_norm_;
  ad::Parameter* bottleneck_w_ = nullptr;
  ad::Parameter* bottleneck_b_ = nullptr;
  std::vector<Block> blocks_;
  ad::Parameter* out_prelu_ = nullptr;
  ad::Parameter* out_w_ = nullptr;
  ad::Parameter* out_b_ = nullptr;
};

// Elementwise product of each mask with the mixture representation.
std::vector<Tensor> ApplyMasks(const std::vector<Tensor>& masks, const Tensor& mixture);

}  // namespace sepkit::separator
