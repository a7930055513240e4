// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "sepkit/autodiff/ops.h"
#include "sepkit/autodiff/optim.h"
#include "sepkit/autodiff/tensor.h"

// Encoder/decoder shared by the spectrogram and waveform pipelines. Both are
// a strided Conv1d on the way in and a ConvTranspose1d on the way out; only
// the kernel bank differs.
namespace sepkit::codec {

using ad::Tensor;

enum class Domain { kSpectrogram, kWaveform };
enum class WindowMode { kFixedHann, kTrainable };

struct CodecConfig {
  Domain domain = Domain::kSpectrogram;
  int64_t length = 512;  // window / filter length in samples
  int64_t hop = 160;
  int64_t filters = 257;  // frequency bins (spectrogram) or learned filters
  WindowMode window = WindowMode::kFixedHann;
  int sample_rate = 16000;

  static CodecConfig Spectrogram(int64_t length, int64_t hop,
                                 WindowMode window = WindowMode::kFixedHann);
  // hop defaults to length / 2.
  static CodecConfig Waveform(int64_t length, int64_t filters, int64_t hop = 0);

  // Throws ConfigError when the invariants do not hold.
  void Validate() const;
  int64_t NumFrames(int64_t samples) const;
};

struct ComplexFrames {
  Tensor re;  // [N x F]
  Tensor im;  // [N x F]
};

struct StftKernels {
  Tensor re;  // [N x 1 x L]
  Tensor im;  // [N x 1 x L]
};

struct Polar {
  Tensor magnitude;
  Tensor phase;
};

// Periodic Hann window, w[n] = 0.5 (1 - cos(2 pi n / L)). L must be even.
Tensor HannWindow(int64_t length);

// K_re[k, 0, n] = w[n] cos(2 pi n k / L), K_im[k, 0, n] = w[n] sin(2 pi n k / L),
// differentiable with respect to the window.
StftKernels BuildStftKernels(int64_t length, int64_t bins, const Tensor& window);

// Half-spectrum synthesis weights: 1/L for DC and Nyquist, 2/L elsewhere.
std::vector<double> SynthesisBinWeights(int64_t length, int64_t bins);

class KernelBank {
 public:
  // Spectrogram bank: one window tensor feeds both analysis and synthesis.
  static KernelBank Stft(const CodecConfig& config);
  // Waveform bank: independent trainable encoder and decoder filters.
  static KernelBank Learned(const CodecConfig& config, uint64_t seed);

  Domain domain() const { return domain_; }
  int64_t length() const { return length_; }
  int64_t filters() const { return filters_; }

  // Spectrogram only.
  const Tensor& window() const { return window_.value; }
  ad::Parameter& window_parameter() { return window_; }
  StftKernels Kernels() const;

  // Waveform only.
  ad::Parameter& encoder() { return encoder_; }
  ad::Parameter& decoder() { return decoder_; }
  const ad::Parameter& encoder() const { return encoder_; }
  const ad::Parameter& decoder() const { return decoder_; }

  // Trainable parameters; empty for a fixed-window STFT bank.
  std::vector<ad::Parameter*> parameters();

 private:
  Domain domain_ = Domain::kSpectrogram;
  int64_t length_ = 0;
  int64_t filters_ = 0;
  bool trainable_window_ = false;
  ad::Parameter window_;
  Tensor cos_basis_;  // [N x L]
  Tensor sin_basis_;  // [N x L]
  ad::Parameter encoder_;
  ad::Parameter decoder_;
};

// Spectrogram analysis of a [T] signal.
//
// The textbook STFT carries a per-frame phase factor exp(-i 2 pi n k / T) in
// front of the convolution. It is not applied here: the decoder uses the
// same kernels, so applying it on analysis and removing it on synthesis
// cancels, and magnitudes and inter-channel phase differences do not see it.
// With K_im = +w sin(.) the imaginary plane is the conjugate of the
// exp(-i ...) convention, so phases carry the opposite sign.
ComplexFrames Encode(const Tensor& signal, const KernelBank& bank, const CodecConfig& config);

// Waveform analysis: ReLU(conv1d(signal, encoder)), [N x F].
Tensor EncodeLatent(const Tensor& signal, const KernelBank& bank, const CodecConfig& config);

// Overlap-add synthesis with the tied kernels followed by division by the
// squared-window envelope sum_m w^2[n - m hop]. Samples whose envelope is
// below kEnvelopeFloor (the first sample of a periodic Hann window) are set
// to zero. Throws ConfigError when the envelope vanishes between the first
// and last fully-overlapped samples.
Tensor Decode(const ComplexFrames& frames, const KernelBank& bank, const CodecConfig& config,
              int64_t out_len);

// Waveform synthesis: conv_transpose1d(latent, decoder), padded to out_len.
Tensor DecodeLatent(const Tensor& latent, const KernelBank& bank, const CodecConfig& config,
                    int64_t out_len);

inline constexpr double kEnvelopeFloor = 1e-8;

// Squared-window overlap envelope for `frames` frames, length (F-1)*hop + L.
Tensor WindowEnvelope(const Tensor& window, int64_t frames, int64_t hop);

// mag = sqrt(re^2 + im^2); phase = atan2(im, re) with atan2(0, 0) = 0.
Polar MagnitudePhase(const ComplexFrames& frames);

// re = mag cos(phase), im = mag sin(phase). Negative magnitudes are rejected.
ComplexFrames ReconstructComplex(const Tensor& magnitude, const Tensor& phase);

}  // namespace sepkit::codec
