// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "sepkit/autodiff/gradcheck.h"
#include "sepkit/autodiff/ops.h"
#include "sepkit/codec/codec.h"
#include "sepkit/error.h"
#include "sepkit/objectives/objectives.h"
#include "test_support.h"

using namespace sepkit;
using namespace sepkit::objectives;
using sepkit::testing::RandomSignal;
using sepkit::testing::RandomTensor;

namespace {

// Direct evaluation: scale the reference by the optimal projection and
// compare energies, written out without the library helpers.
double DirectRatio(std::vector<double> est, std::vector<double> ref, bool zero_mean) {
  if (zero_mean) {
    double me = 0, mr = 0;
    for (size_t i = 0; i < est.size(); ++i) {
      me += est[i];
      mr += ref[i];
    }
    me /= est.size();
    mr /= ref.size();
    for (size_t i = 0; i < est.size(); ++i) {
      est[i] -= me;
      ref[i] -= mr;
    }
  }
  double num = 0, den = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    num += est[i] * ref[i];
    den += ref[i] * ref[i];
  }
  double pt = 0, pn = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    const double t = num / den * ref[i];
    pt += t * t;
    pn += (est[i] - t) * (est[i] - t);
  }
  return 10.0 * std::log10(pt / pn);
}

Tensor T1(const std::vector<double>& x) { return Tensor::FromData({static_cast<int64_t>(x.size())}, x); }

const std::array<std::array<int, 3>, 6> kPerms3 = {
    {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

}  // namespace

TEST_CASE("si-snr saturation and formula") {
  std::mt19937_64 rng(1);
  const auto ref = RandomSignal(500, rng);
  std::vector<double> scaled(ref);
  for (double& v : scaled) v *= 3.7;
  CHECK(SiSnr(scaled, ref) == kMetricCapDb);
  CHECK(SiSnr(std::vector<double>{1, 1, -1, -1}, std::vector<double>{1, -1, 1, -1}) == -kMetricCapDb);
  CHECK(SiSnr(std::vector<double>{1, 0}, std::vector<double>{1, -1}) == kMetricCapDb);
  const std::vector<double> est3{1.0, 0.0, 0.3}, ref3{1.0, -1.0, 0.5};
  CHECK(SiSnr(est3, ref3) == doctest::Approx(DirectRatio(est3, ref3, true)).epsilon(1e-12));
  CHECK_THROWS_AS(SiSnr(std::vector<double>{1, 2}, std::vector<double>{0.1, 0.1}), MetricError);
  CHECK_THROWS_AS(Sdr(std::vector<double>{1, 2}, std::vector<double>{0.0, 0.0}), MetricError);
  CHECK_THROWS_AS(SiSnr(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), InputError);
}

TEST_CASE("sdr keeps the mean") {
  std::mt19937_64 rng(2);
  const auto ref = RandomSignal(400, rng);
  std::vector<double> est(ref);
  for (double& v : est) v += 0.2;
  CHECK(Sdr(ref, ref) == kMetricCapDb);
  CHECK(SiSnr(est, ref) == kMetricCapDb);
  CHECK(Sdr(est, ref) == doctest::Approx(DirectRatio(est, ref, false)).epsilon(1e-12));
  CHECK(Sdr(est, ref) < 60.0);
}

TEST_CASE("metrics against direct formulas on random pairs") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto a = RandomSignal(300, rng), b = RandomSignal(300, rng);
    std::vector<double> est(a);
    for (size_t k = 0; k < est.size(); ++k) est[k] = 0.7 * b[k] + 0.3 * a[k] + 0.05;
    CHECK(std::abs(SiSnr(est, b) - DirectRatio(est, b, true)) < 1e-9);
    CHECK(std::abs(Sdr(est, b) - DirectRatio(est, b, false)) < 1e-9);
  }
}

TEST_CASE("si-snr invariances") {
  std::mt19937_64 rng(4);
  const auto ref = RandomSignal(300, rng), noise = RandomSignal(300, rng);
  std::vector<double> est(ref);
  for (size_t i = 0; i < est.size(); ++i) est[i] += 0.5 * noise[i];
  const double base = SiSnr(est, ref);
  for (double alpha : {0.1, 1.0, 10.0}) {
    std::vector<double> s(est);
    for (double& v : s) v *= alpha;
    CHECK(std::abs(SiSnr(s, ref) - base) < 1e-9);
  }
  std::vector<double> shifted(est);
  for (double& v : shifted) v += 3.0;
  CHECK(std::abs(SiSnr(shifted, ref) - base) < 1e-9);
}

TEST_CASE("si-snr tensor value and gradient") {
  std::mt19937_64 rng(5);
  const auto ref = RandomSignal(64, rng), est = RandomSignal(64, rng);
  Tensor e = T1(est).set_requires_grad(true);
  CHECK(SiSnrTensor(e, T1(ref)).item() == doctest::Approx(SiSnr(est, ref)).epsilon(1e-12));
  const auto r = ad::CheckGradient([&] { return SiSnrTensor(e, T1(ref)); }, e);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("upit trivial cases") {
  std::mt19937_64 rng(6);
  const Tensor a = T1(RandomSignal(200, rng)), b = T1(RandomSignal(200, rng));
  const UpitResult one = UpitNegSiSnr({a}, {b});
  CHECK(one.assignment.mapping == std::vector<int>{0});
  const UpitResult swapped = UpitNegSiSnr({b, a}, {a, b});
  CHECK(swapped.assignment.mapping == std::vector<int>{1, 0});
  CHECK(swapped.assignment.loss == -kMetricCapDb);
  CHECK(swapped.loss.item() == -kMetricCapDb);
  CHECK_THROWS_AS(UpitNegSiSnr({a, b}, {a}), InputError);
}

TEST_CASE("upit matches brute-force enumeration") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> est, ref;
    std::vector<std::vector<double>> est_raw, ref_raw;
    for (int s = 0; s < 3; ++s) {
      ref_raw.push_back(RandomSignal(120, rng));
      est_raw.push_back(RandomSignal(120, rng));
      ref.push_back(T1(ref_raw.back()));
      est.push_back(T1(est_raw.back()));
    }
    double best = 0;
    std::array<int, 3> arg{};
    for (size_t p = 0; p < kPerms3.size(); ++p) {
      double total = 0;
      for (int s = 0; s < 3; ++s) total += -DirectRatio(est_raw[s], ref_raw[kPerms3[p][s]], true) / 3.0;
      if (p == 0 || total < best) {
        best = total;
        arg = kPerms3[p];
      }
    }
    const UpitResult r = UpitNegSiSnr(est, ref);
    CHECK(r.assignment.mapping == std::vector<int>(arg.begin(), arg.end()));
    CHECK(r.assignment.loss == doctest::Approx(best).epsilon(1e-12));
    CHECK(r.loss.item() == doctest::Approx(best).epsilon(1e-12));

    // Masks and magnitudes through the MSE criterion.
    std::vector<Tensor> masks, mags;
    const Tensor mix = RandomTensor({4, 5}, rng, 0.0, 2.0);
    for (int s = 0; s < 3; ++s) {
      masks.push_back(RandomTensor({4, 5}, rng, 0.0, 1.0));
      mags.push_back(RandomTensor({4, 5}, rng, 0.0, 2.0));
    }
    double mbest = 0;
    std::array<int, 3> marg{};
    for (size_t p = 0; p < kPerms3.size(); ++p) {
      double total = 0;
      for (int s = 0; s < 3; ++s)
        for (int k = 0; k < 20; ++k) {
          const double d = masks[s][k] * mix[k] - mags[kPerms3[p][s]][k];
          total += d * d;
        }
      total /= 60.0;
      if (p == 0 || total < mbest) {
        mbest = total;
        marg = kPerms3[p];
      }
    }
    const UpitResult m = UpitMse(masks, mix, mags);
    CHECK(m.assignment.mapping == std::vector<int>(marg.begin(), marg.end()));
    CHECK(m.loss.item() == doctest::Approx(mbest).epsilon(1e-12));
  }
}

TEST_CASE("upit permutation symmetry") {
  std::mt19937_64 rng(8);
  std::vector<Tensor> est, ref;
  for (int s = 0; s < 3; ++s) {
    est.push_back(T1(RandomSignal(100, rng)));
    ref.push_back(T1(RandomSignal(100, rng)));
  }
  const UpitResult base = UpitNegSiSnr(est, ref);
  for (const auto& p : kPerms3) {
    // Reference j moves to slot q[j]; the best mapping follows it.
    std::vector<Tensor> permuted(3);
    for (int j = 0; j < 3; ++j) permuted[p[j]] = ref[j];
    const UpitResult r = UpitNegSiSnr(est, permuted);
    CHECK(r.assignment.loss == base.assignment.loss);
    for (int s = 0; s < 3; ++s) CHECK(r.assignment.mapping[s] == p[base.assignment.mapping[s]]);
    // Relabeling the estimates leaves the loss unchanged.
    std::vector<Tensor> est_perm(3);
    for (int j = 0; j < 3; ++j) est_perm[p[j]] = est[j];
    CHECK(UpitNegSiSnr(est_perm, ref).assignment.loss == doctest::Approx(base.assignment.loss).epsilon(1e-14));
  }
}

TEST_CASE("upit mse gradient") {
  std::mt19937_64 rng(9);
  Tensor m0 = RandomTensor({3, 4}, rng, 0.0, 1.0).set_requires_grad(true);
  Tensor m1 = RandomTensor({3, 4}, rng, 0.0, 1.0).set_requires_grad(true);
  const Tensor mix = RandomTensor({3, 4}, rng, 0.0, 2.0);
  const std::vector<Tensor> mags{RandomTensor({3, 4}, rng, 0.0, 1.0), RandomTensor({3, 4}, rng, 0.0, 1.0)};
  auto loss = [&] { return UpitMse({m0, m1}, mix, mags).loss; };
  CHECK(ad::CheckGradient(loss, m0).max_rel_error < 1e-6);
  CHECK(ad::CheckGradient(loss, m1).max_rel_error < 1e-6);
}

TEST_CASE("ideal mask definitions") {
  std::mt19937_64 rng(10);
  const ad::Shape shape{6, 7};
  const Tensor zero = Tensor::Zeros(shape);
  SUBCASE("single active source") {
    const Tensor mag = RandomTensor(shape, rng, 0.1, 1.0), ph = RandomTensor(shape, rng, -3, 3);
    const IdealMaskSet m = IdealMasks({mag, zero}, {ph, zero}, mag, ph);
    for (int64_t i = 0; i < mag.numel(); ++i) {
      CHECK(m.iam[0][i] == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(m.irm[0][i] == 1.0);
      CHECK(m.ibm[0][i] == 1.0);
      CHECK(m.ipsm[0][i] == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(m.ibm[1][i] == 0.0);
    }
  }
  SUBCASE("identical sources") {
    const Tensor mag = RandomTensor(shape, rng, 0.1, 1.0), ph = RandomTensor(shape, rng, -3, 3);
    const IdealMaskSet m = IdealMasks({mag, mag}, {ph, ph}, ad::MulScalar(mag, 2.0), ph);
    for (int64_t i = 0; i < mag.numel(); ++i) {
      CHECK(m.irm[0][i] == 0.5);
      CHECK(m.irm[1][i] == 0.5);
      CHECK(m.ibm[0][i] == 1.0);  // tie goes to the lower index
      CHECK(m.ibm[1][i] == 0.0);
    }
  }
  SUBCASE("random mixtures") {
    const Tensor a = RandomTensor(shape, rng, 0.0, 1.0), b = RandomTensor(shape, rng, 0.0, 1.0);
    const Tensor pa = RandomTensor(shape, rng, -3, 3), pb = RandomTensor(shape, rng, -3, 3);
    const Tensor ym = RandomTensor(shape, rng, 0.0, 0.2), yp = RandomTensor(shape, rng, -3, 3);
    const IdealMaskSet m = IdealMasks({a, b}, {pa, pb}, ym, yp);
    for (int64_t i = 0; i < a.numel(); ++i) {
      CHECK(m.irm[0][i] + m.irm[1][i] == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(m.ibm[0][i] + m.ibm[1][i] == 1.0);
      CHECK(m.ibm[0][i] == (b[i] > a[i] ? 0.0 : 1.0));
      CHECK(m.iam[0][i] == doctest::Approx(std::min(a[i] / ym[i], 10.0)).epsilon(1e-14));
      CHECK(m.ipsm[1][i] == doctest::Approx(b[i] * std::cos(yp[i] - pb[i]) / ym[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("binary mask separates disjoint tones") {
  const int64_t len = 8000;
  std::vector<double> t1(len), t2(len), mix(len);
  for (int64_t n = 0; n < len; ++n) {
    t1[n] = 0.5 * std::cos(2.0 * std::numbers::pi * 1000.0 * n / 16000.0);
    t2[n] = 0.3 * std::sin(2.0 * std::numbers::pi * 3000.0 * n / 16000.0);
    mix[n] = t1[n] + t2[n];
  }
  const auto cfg = codec::CodecConfig::Spectrogram(512, 128);
  const auto bank = codec::KernelBank::Stft(cfg);
  const auto y = codec::Encode(T1(mix), bank, cfg);
  const auto py = codec::MagnitudePhase(y);
  const auto p1 = codec::MagnitudePhase(codec::Encode(T1(t1), bank, cfg));
  const auto p2 = codec::MagnitudePhase(codec::Encode(T1(t2), bank, cfg));
  const IdealMaskSet m = IdealMasks({p1.magnitude, p2.magnitude}, {p1.phase, p2.phase},
                                    py.magnitude, py.phase);
  const int64_t end = (cfg.NumFrames(len) - 1) * 128;
  const std::vector<std::vector<double>*> refs{&t1, &t2};
  for (int s = 0; s < 2; ++s) {
    const codec::ComplexFrames masked{ad::Mul(m.ibm[s], y.re), ad::Mul(m.ibm[s], y.im)};
    const Tensor out = codec::Decode(masked, bank, cfg, len);
    const std::vector<double> est(out.data().begin() + 512, out.data().begin() + end);
    const std::vector<double> ref(refs[s]->begin() + 512, refs[s]->begin() + end);
    CHECK(SiSnr(est, ref) > 40.0);
  }
}
