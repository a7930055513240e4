// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/codec/codec.h"

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <utility>

#include "sepkit/error.h"

namespace sepkit::codec {
namespace {

// cos/sin of 2 pi m / L with the quarter-turn points returned exactly, so the
// DC and Nyquist rows of the imaginary kernel are exactly zero.
std::pair<double, double> UnitCosSin(int64_t m, int64_t len) {
  m %= len;
  if (m == 0) return {1.0, 0.0};
  if (2 * m == len) return {-1.0, 0.0};
  if (4 * m == len) return {0.0, 1.0};
  if (4 * m == 3 * len) return {0.0, -1.0};
  const double ang = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(len);
  return {std::cos(ang), std::sin(ang)};
}

Tensor AsRow(const Tensor& signal) {
  if (signal.ndim() == 1) return ad::Reshape(signal, {1, signal.numel()});
  if (signal.ndim() == 2 && signal.dim(0) == 1) return signal;
  throw DimensionError("codec: expected a mono signal [T], got " +
                       ad::ShapeToString(signal.shape()));
}

void CheckSignal(const Tensor& signal, const CodecConfig& config) {
  const int64_t samples = signal.shape().back();
  if (samples < config.length) {
    throw InputError("codec: signal has " + std::to_string(samples) +
                     " samples, shorter than window length " + std::to_string(config.length));
  }
}

Tensor FitLength(const Tensor& row, int64_t out_len) {
  const int64_t have = row.dim(1);
  Tensor fitted = row;
  if (have > out_len) fitted = ad::SliceLast(row, 0, out_len);
  if (have < out_len) fitted = ad::PadLast(row, 0, out_len - have);
  return ad::Reshape(fitted, {out_len});
}

}  // namespace

CodecConfig CodecConfig::Spectrogram(int64_t length, int64_t hop, WindowMode window) {
  CodecConfig c;
  c.domain = Domain::kSpectrogram;
  c.length = length;
  c.hop = hop;
  c.filters = length / 2 + 1;
  c.window = window;
  return c;
}

CodecConfig CodecConfig::Waveform(int64_t length, int64_t filters, int64_t hop) {
  CodecConfig c;
  c.domain = Domain::kWaveform;
  c.length = length;
  c.hop = hop > 0 ? hop : length / 2;
  c.filters = filters;
  return c;
}

void CodecConfig::Validate() const {
  if (length < 2) throw ConfigError("codec: window length must be at least 2");
  if (hop < 1 || hop > length) {
    throw ConfigError("codec: hop " + std::to_string(hop) + " must lie in [1, " +
                      std::to_string(length) + "]");
  }
  if (sample_rate <= 0) throw ConfigError("codec: sample rate must be positive");
  if (domain == Domain::kSpectrogram) {
    if (length % 2 != 0) {
      throw ConfigError("codec: spectrogram window length must be even, got " +
                        std::to_string(length));
    }
    if (filters != length / 2 + 1) {
      throw ConfigError("codec: spectrogram needs L/2+1 = " + std::to_string(length / 2 + 1) +
                        " bins, got " + std::to_string(filters));
    }
  } else if (filters < 1) {
    throw ConfigError("codec: waveform filter count must be positive");
  }
}

int64_t CodecConfig::NumFrames(int64_t samples) const {
  if (samples < length) return 0;
  return (samples - length) / hop + 1;
}

Tensor HannWindow(int64_t length) {
  if (length < 2 || length % 2 != 0) {
    throw ConfigError("codec: Hann window length must be even, got " + std::to_string(length));
  }
  Tensor w = Tensor::Zeros({length});
  std::span<double> d = w.mutable_data();
  for (int64_t n = 0; n < length; ++n) d[n] = 0.5 - 0.5 * UnitCosSin(n, length).first;
  return w;
}

std::vector<double> SynthesisBinWeights(int64_t length, int64_t bins) {
  std::vector<double> c(static_cast<size_t>(bins), 2.0 / static_cast<double>(length));
  c[0] = 1.0 / static_cast<double>(length);
  if (2 * (bins - 1) == length) c[bins - 1] = 1.0 / static_cast<double>(length);
  return c;
}

namespace {

std::pair<Tensor, Tensor> Bases(int64_t length, int64_t bins) {
  Tensor cb = Tensor::Zeros({bins, length});
  Tensor sb = Tensor::Zeros({bins, length});
  std::span<double> c = cb.mutable_data();
  std::span<double> s = sb.mutable_data();
  for (int64_t k = 0; k < bins; ++k) {
    for (int64_t n = 0; n < length; ++n) {
      auto [cv, sv] = UnitCosSin(n * k, length);
      c[k * length + n] = cv;
      s[k * length + n] = sv;
    }
  }
  return {cb, sb};
}

StftKernels KernelsFromBases(const Tensor& cos_basis, const Tensor& sin_basis,
                             const Tensor& window) {
  const int64_t bins = cos_basis.dim(0);
  const int64_t length = cos_basis.dim(1);
  if (window.numel() != length) {
    throw DimensionError("codec: window has " + std::to_string(window.numel()) +
                         " taps, kernels need " + std::to_string(length));
  }
  return {ad::Reshape(ad::MulTrailing(cos_basis, window), {bins, 1, length}),
          ad::Reshape(ad::MulTrailing(sin_basis, window), {bins, 1, length})};
}

}  // namespace

StftKernels BuildStftKernels(int64_t length, int64_t bins, const Tensor& window) {
  auto [cb, sb] = Bases(length, bins);
  return KernelsFromBases(cb, sb, window);
}

KernelBank KernelBank::Stft(const CodecConfig& config) {
  config.Validate();
  if (config.domain != Domain::kSpectrogram) throw UsageError("codec: Stft bank needs spectrogram config");
  KernelBank bank;
  bank.domain_ = Domain::kSpectrogram;
  bank.length_ = config.length;
  bank.filters_ = config.filters;
  bank.trainable_window_ = config.window == WindowMode::kTrainable;
  bank.window_ = ad::Parameter("codec.window", HannWindow(config.length));
  bank.window_.value.set_requires_grad(bank.trainable_window_);
  std::tie(bank.cos_basis_, bank.sin_basis_) = Bases(config.length, config.filters);
  return bank;
}

KernelBank KernelBank::Learned(const CodecConfig& config, uint64_t seed) {
  config.Validate();
  if (config.domain != Domain::kWaveform) throw UsageError("codec: Learned bank needs waveform config");
  KernelBank bank;
  bank.domain_ = Domain::kWaveform;
  bank.length_ = config.length;
  bank.filters_ = config.filters;
  std::mt19937_64 rng(seed);
  bank.encoder_ = ad::Parameter(
      "codec.encoder", ad::FanInUniform({config.filters, 1, config.length}, config.length, rng));
  bank.decoder_ = ad::Parameter(
      "codec.decoder", ad::FanInUniform({config.filters, 1, config.length}, config.filters, rng));
  return bank;
}

StftKernels KernelBank::Kernels() const {
  if (domain_ != Domain::kSpectrogram) throw UsageError("codec: waveform bank has no STFT kernels");
  return KernelsFromBases(cos_basis_, sin_basis_, window_.value);
}

std::vector<ad::Parameter*> KernelBank::parameters() {
  if (domain_ == Domain::kWaveform) return {&encoder_, &decoder_};
  if (trainable_window_) return {&window_};
  return {};
}

ComplexFrames Encode(const Tensor& signal, const KernelBank& bank, const CodecConfig& config) {
  if (bank.domain() != Domain::kSpectrogram) throw UsageError("codec: Encode needs an STFT bank");
  CheckSignal(signal, config);
  const Tensor row = AsRow(signal);
  const StftKernels k = bank.Kernels();
  ad::Conv1dOptions opts;
  opts.stride = config.hop;
  return {ad::Conv1d(row, k.re, opts), ad::Conv1d(row, k.im, opts)};
}

Tensor EncodeLatent(const Tensor& signal, const KernelBank& bank, const CodecConfig& config) {
  if (bank.domain() != Domain::kWaveform) throw UsageError("codec: EncodeLatent needs a learned bank");
  CheckSignal(signal, config);
  ad::Conv1dOptions opts;
  opts.stride = config.hop;
  return ad::Relu(ad::Conv1d(AsRow(signal), bank.encoder().value, opts));
}

Tensor WindowEnvelope(const Tensor& window, int64_t frames, int64_t hop) {
  const Tensor sq = ad::Reshape(ad::Square(window), {1, 1, window.numel()});
  return ad::ConvTranspose1d(Tensor::Full({1, frames}, 1.0), sq, hop);
}

Tensor Decode(const ComplexFrames& frames, const KernelBank& bank, const CodecConfig& config,
              int64_t out_len) {
  if (bank.domain() != Domain::kSpectrogram) throw UsageError("codec: Decode needs an STFT bank");
  if (frames.re.shape() != frames.im.shape()) {
    throw DimensionError("codec: real " + ad::ShapeToString(frames.re.shape()) +
                         " and imaginary " + ad::ShapeToString(frames.im.shape()) +
                         " planes differ");
  }
  if (frames.re.ndim() != 2 || frames.re.dim(0) != bank.filters()) {
    throw DimensionError("codec: expected [" + std::to_string(bank.filters()) +
                         " x F] frames, got " + ad::ShapeToString(frames.re.shape()));
  }
  const int64_t num_frames = frames.re.dim(1);
  const Tensor weights = Tensor::FromData({bank.filters()},
                                          SynthesisBinWeights(config.length, bank.filters()));
  const StftKernels k = bank.Kernels();
  const Tensor summed =
      ad::Add(ad::ConvTranspose1d(ad::MulChannel(frames.re, weights), k.re, config.hop),
              ad::ConvTranspose1d(ad::MulChannel(frames.im, weights), k.im, config.hop));

  const Tensor env = WindowEnvelope(bank.window(), num_frames, config.hop);
  const int64_t covered = env.numel();
  Tensor keep = Tensor::Zeros({1, covered});
  Tensor guard = Tensor::Zeros({1, covered});
  const int64_t interior_end = (num_frames - 1) * config.hop;
  for (int64_t i = 0; i < covered; ++i) {
    if (env[i] >= kEnvelopeFloor) {
      keep.mutable_data()[i] = 1.0;
      continue;
    }
    if (i >= config.length && i <= interior_end) {
      throw ConfigError("codec: window/hop pair (L=" + std::to_string(config.length) +
                        ", hop=" + std::to_string(config.hop) +
                        ") leaves zero overlap envelope at sample " + std::to_string(i));
    }
    guard.mutable_data()[i] = 1.0;
  }
  const Tensor normalized = ad::Mul(ad::Div(summed, ad::Add(env, guard)), keep);
  return FitLength(normalized, out_len);
}

Tensor DecodeLatent(const Tensor& latent, const KernelBank& bank, const CodecConfig& config,
                    int64_t out_len) {
  if (bank.domain() != Domain::kWaveform) throw UsageError("codec: DecodeLatent needs a learned bank");
  if (latent.ndim() != 2 || latent.dim(0) != bank.filters()) {
    throw DimensionError("codec: expected [" + std::to_string(bank.filters()) +
                         " x F] latent, got " + ad::ShapeToString(latent.shape()));
  }
  return FitLength(ad::ConvTranspose1d(latent, bank.decoder().value, config.hop), out_len);
}

Polar MagnitudePhase(const ComplexFrames& frames) {
  if (frames.re.shape() != frames.im.shape()) {
    throw DimensionError("codec: real and imaginary planes differ in shape");
  }
  return {ad::Sqrt(ad::Add(ad::Square(frames.re), ad::Square(frames.im))),
          ad::Atan2(frames.im, frames.re)};
}

ComplexFrames ReconstructComplex(const Tensor& magnitude, const Tensor& phase) {
  if (magnitude.shape() != phase.shape()) {
    throw DimensionError("codec: magnitude " + ad::ShapeToString(magnitude.shape()) +
                         " and phase " + ad::ShapeToString(phase.shape()) + " differ");
  }
  std::span<const double> m = magnitude.data();
  for (size_t i = 0; i < m.size(); ++i) {
    if (m[i] < 0.0) {
      throw InputError("codec: negative magnitude " + std::to_string(m[i]) + " at index " +
                       std::to_string(i));
    }
  }
  return {ad::Mul(magnitude, ad::Cos(phase)), ad::Mul(magnitude, ad::Sin(phase))};
}

}  // namespace sepkit::codec
