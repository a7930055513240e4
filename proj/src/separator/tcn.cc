// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/separator/tcn.h"

#include <random>

#include "sepkit/error.h"

namespace sepkit::separator {

void TcnConfig::Validate() const {
  auto positive = [](int64_t v, const char* key) {
    if (v < 1) throw ConfigError(std::string("tcn: ") + key + " must be positive, got " + std::to_string(v));
  };
  positive(N, "N");
  positive(B, "B");
  positive(H, "H");
  positive(X, "X");
  positive(R, "R");
  positive(S, "S");
  positive(input_width, "input_width");
  if (P < 1 || P % 2 == 0) throw ConfigError("tcn: P must be odd, got " + std::to_string(P));
  if (X > 20) throw ConfigError("tcn: X too large: " + std::to_string(X));
}

std::vector<BlockPadding> DilationSchedule(const TcnConfig& config) {
  std::vector<BlockPadding> out;
  for (int64_t r = 0; r < config.R; ++r) {
    const bool symmetric = config.causality == Causality::kNonCausal ||
                           (config.causality == Causality::kSemiCausal && r == 0);
    for (int64_t x = 0; x < config.X; ++x) {
      const int64_t d = int64_t{1} << x;
      const int64_t span = (config.P - 1) * d;
      if (symmetric) {
        out.push_back({d, span / 2, span / 2});
      } else {
        out.push_back({d, span, 0});
      }
    }
  }
  return out;
}

ReceptiveField ComputeReceptiveField(const TcnConfig& config, int64_t hop, int sample_rate) {
  ReceptiveField rf;
  rf.exact_frames = 1;
  for (const BlockPadding& b : DilationSchedule(config)) rf.exact_frames += (config.P - 1) * b.dilation;
  rf.table_frames = (int64_t{1} << (config.X + 1)) * config.R;
  const double frame_s = static_cast<double>(hop) / static_cast<double>(sample_rate);
  rf.exact_seconds = static_cast<double>(rf.exact_frames) * frame_s;
  rf.table_seconds = static_cast<double>(rf.table_frames) * frame_s;
  return rf;
}

int64_t LookaheadFrames(const TcnConfig& config) {
  int64_t frames = 0;
  for (const BlockPadding& b : DilationSchedule(config)) {
    frames += (config.P - 1) * b.dilation - b.pad_left;
  }
  return frames;
}

double LookaheadSeconds(const TcnConfig& config, int64_t hop, int sample_rate) {
  return static_cast<double>(LookaheadFrames(config) * hop) / static_cast<double>(sample_rate);
}

const char* CausalityName(Causality c) {
  switch (c) {
    case Causality::kNonCausal: return "non_causal";
    case Causality::kCausal: return "causal";
    case Causality::kSemiCausal: return "semi_causal";
  }
  return "?";
}

Causality ParseCausality(const std::string& name) {
  if (name == "non_causal") return Causality::kNonCausal;
  if (name == "causal") return Causality::kCausal;
  if (name == "semi_causal") return Causality::kSemiCausal;
  throw ConfigError("tcn: unknown causality '" + name + "'");
}

const char* NormName(ad::NormKind kind) {
  switch (kind) {
    case ad::NormKind::kBatch: return "BN";
    case ad::NormKind::kGlobalLayer: return "gLN";
    case ad::NormKind::kChannelLayer: return "cLN";
  }
  return "?";
}

ad::NormKind ParseNorm(const std::string& name) {
  if (name == "BN") return ad::NormKind::kBatch;
  if (name == "gLN") return ad::NormKind::kGlobalLayer;
  if (name == "cLN") return ad::NormKind::kChannelLayer;
  throw ConfigError("tcn: unknown norm '" + name + "'");
}

const char* MaskActivationName(MaskActivation a) {
  switch (a) {
    case MaskActivation::kRelu: return "relu";
    case MaskActivation::kSigmoid: return "sigmoid";
    case MaskActivation::kLinear: return "linear";
  }
  return "?";
}

MaskActivation ParseMaskActivation(const std::string& name) {
  if (name == "relu") return MaskActivation::kRelu;
  if (name == "sigmoid") return MaskActivation::kSigmoid;
  if (name == "linear") return MaskActivation::kLinear;
  throw ConfigError("tcn: unknown mask activation '" + name + "'");
}

ad::Parameter* Tcn::Add(const std::string& name, Tensor init) {
  params_.emplace_back(name, std::move(init));
  return &params_.back();
}

Tcn::Norm Tcn::MakeNorm(const std::string& prefix, int64_t channels) {
  Norm n;
  n.scale = Add(prefix + ".scale", Tensor::Full({channels}, 1.0));
  n.shift = Add(prefix + ".shift", Tensor::Zeros({channels}));
  norm_states_.push_back({prefix, {}});
  n.state = &norm_states_.back().state;
  // Allocated up front so concurrent inference never initializes them.
  if (config_.norm == ad::NormKind::kBatch) {
    n.state->running_mean.assign(static_cast<size_t>(channels), 0.0);
    n.state->running_var.assign(static_cast<size_t>(channels), 1.0);
  }
  return n;
}

Tcn::Tcn(const TcnConfig& config, uint64_t seed) : config_(config) {
  config_.Validate();
  std::mt19937_64 rng(seed);
  const TcnConfig& c = config_;
  auto conv = [&](const std::string& name, int64_t out, int64_t in, int64_t k) {
    return Add(name, ad::FanInUniform({out, in, k}, in * k, rng));
  };
  auto prelu = [&](const std::string& name, int64_t channels) {
    return Add(name, Tensor::Full({channels}, 0.25));
  };
  auto bias = [&](const std::string& name, int64_t channels) {
    return Add(name, Tensor::Zeros({channels}));
  };

  input_norm_ = MakeNorm("tcn.input_norm", c.input_width);
  bottleneck_w_ = conv("tcn.bottleneck.w", c.B, c.input_width, 1);
  bottleneck_b_ = bias("tcn.bottleneck.b", c.B);
  const std::vector<BlockPadding> schedule = DilationSchedule(c);
  for (size_t i = 0; i < schedule.size(); ++i) {
    const std::string p = "tcn.block" + std::to_string(i);
    Block b;
    b.in_w = conv(p + ".in.w", c.H, c.B, 1);
    b.in_b = bias(p + ".in.b", c.H);
    b.prelu1 = prelu(p + ".prelu1", c.H);
    b.norm1 = MakeNorm(p + ".norm1", c.H);
    b.dw_w = conv(p + ".dw.w", c.H, 1, c.P);
    b.dw_b = bias(p + ".dw.b", c.H);
    b.prelu2 = prelu(p + ".prelu2", c.H);
    b.norm2 = MakeNorm(p + ".norm2", c.H);
    b.out_w = conv(p + ".out.w", c.B, c.H, 1);
    b.out_b = bias(p + ".out.b", c.B);
    b.pad = schedule[i];
    blocks_.push_back(b);
  }
  out_prelu_ = prelu("tcn.out.prelu", c.B);
  out_w_ = conv("tcn.out.w", c.S * c.N, c.B, 1);
  out_b_ = bias("tcn.out.b", c.S * c.N);
}

Tensor Tcn::ApplyNorm(const Tensor& x, const Norm& n, ad::NormKind kind, bool training) {
  return ad::Normalize(x, kind, n.scale->value, n.shift->value, training, n.state);
}

Tensor Tcn::Trunk(const Tensor& features, bool training) {
  if (features.ndim() != 2 || features.dim(0) != config_.input_width) {
    throw DimensionError("tcn: expected [" + std::to_string(config_.input_width) +
                         " x F] features, got " + ad::ShapeToString(features.shape()));
  }
  Tensor x = ApplyNorm(features, input_norm_, ad::NormKind::kChannelLayer, training);
  x = ad::AddChannel(ad::Conv1d(x, bottleneck_w_->value), bottleneck_b_->value);
  for (const Block& b : blocks_) {
    Tensor y = ad::AddChannel(ad::Conv1d(x, b.in_w->value), b.in_b->value);
    y = ApplyNorm(ad::Prelu(y, b.prelu1->value), b.norm1, config_.norm, training);
    y = ad::AddChannel(
        ad::DepthwiseConv1d(y, b.dw_w->value, b.pad.dilation, b.pad.pad_left, b.pad.pad_right),
        b.dw_b->value);
    y = ApplyNorm(ad::Prelu(y, b.prelu2->value), b.norm2, config_.norm, training);
    y = ad::AddChannel(ad::Conv1d(y, b.out_w->value), b.out_b->value);
    x = ad::Add(x, y);
  }
  return x;
}

std::vector<Tensor> Tcn::Forward(const Tensor& features, bool training) {
  Tensor x = ad::Prelu(Trunk(features, training), out_prelu_->value);
  x = ad::AddChannel(ad::Conv1d(x, out_w_->value), out_b_->value);
  switch (config_.mask_activation) {
    case MaskActivation::kRelu: x = ad::Relu(x); break;
    case MaskActivation::kSigmoid: x = ad::Sigmoid(x); break;
    case MaskActivation::kLinear: break;
  }
  std::vector<Tensor> masks;
  for (int64_t s = 0; s < config_.S; ++s) masks.push_back(ad::SliceRows(x, s * config_.N, config_.N));
  return masks;
}

std::vector<ad::Parameter*> Tcn::parameters() {
  std::vector<ad::Parameter*> out;
  for (ad::Parameter& p : params_) out.push_back(&p);
  return out;
}

ad::Parameter* Tcn::FindParameter(const std::string& name) {
  for (ad::Parameter& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<Tensor> ApplyMasks(const std::vector<Tensor>& masks, const Tensor& mixture) {
  std::vector<Tensor> out;
  for (const Tensor& m : masks) {
    if (m.shape() != mixture.shape()) {
      throw DimensionError("separator: mask " + ad::ShapeToString(m.shape()) +
                           " does not match mixture " + ad::ShapeToString(mixture.shape()));
    }
    out.push_back(ad::Mul(m, mixture));
  }
  return out;
}

}  // namespace sepkit::separator
