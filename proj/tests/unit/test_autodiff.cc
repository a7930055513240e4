// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "sepkit/autodiff/gradcheck.h"
#include "sepkit/autodiff/ops.h"
#include "sepkit/autodiff/optim.h"
#include "sepkit/error.h"
#include "test_support.h"

using namespace sepkit;
using namespace sepkit::ad;
using sepkit::testing::RandomTensor;

namespace {

// Direct nested-loop convolution with explicit zero padding.
std::vector<double> NestedLoopConv(const Tensor& x, const Tensor& w, int64_t stride,
                                   int64_t dilation, int64_t pl, int64_t pr) {
  const int64_t cin = x.dim(0), t = x.dim(1), cout = w.dim(0), k = w.dim(2);
  std::vector<double> padded(static_cast<size_t>(cin * (t + pl + pr)), 0.0);
  const int64_t tp = t + pl + pr;
  for (int64_t c = 0; c < cin; ++c)
    for (int64_t i = 0; i < t; ++i) padded[c * tp + pl + i] = x[c * t + i];
  const int64_t tout = (tp - dilation * (k - 1) - 1) / stride + 1;
  std::vector<double> y(static_cast<size_t>(cout * tout), 0.0);
  for (int64_t co = 0; co < cout; ++co)
    for (int64_t o = 0; o < tout; ++o)
      for (int64_t ci = 0; ci < cin; ++ci)
        for (int64_t j = 0; j < k; ++j)
          y[co * tout + o] += w[(co * cin + ci) * k + j] * padded[ci * tp + o * stride + j * dilation];
  return y;
}

double MaxRelDiff(std::span<const double> a, const std::vector<double>& b) {
  double scale = 0.0, diff = 0.0;
  for (size_t i = 0; i < b.size(); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / std::max(scale, 1e-300);
}

void CheckPrimitive(const char* name, const std::function<Tensor(const Tensor&)>& f,
                    const std::function<Tensor(std::mt19937_64&)>& make_input) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = make_input(rng).set_requires_grad(true);
    auto loss = [&] {
      // Random fixed projection makes every output coordinate matter.
      Tensor y = f(x);
      std::mt19937_64 prng(99);
      Tensor proj = RandomTensor(y.shape(), prng);
      return Sum(Mul(y, proj));
    };
    const GradCheckResult r = CheckGradient(loss, x, {.step = 1e-4});
    INFO(name << " trial " << trial << " worst index " << r.worst_index);
    CHECK(r.max_rel_error < 1e-4);
  }
}

}  // namespace

TEST_CASE("conv1d identity kernel reproduces input") {
  Tensor x = Tensor::FromData({1, 5}, std::vector<double>{1, 2, 3, 4, 5});
  Tensor k = Tensor::FromData({1, 1, 1}, std::vector<double>{1});
  Tensor y = Conv1d(x, k);
  CHECK(y.values() == x.values());
}

TEST_CASE("conv1d strided averaging") {
  Tensor x = Tensor::FromData({1, 4}, std::vector<double>{1, 0, 0, 0});
  Tensor k = Tensor::FromData({1, 1, 2}, std::vector<double>{0.5, 0.5});
  Tensor y = Conv1d(x, k, {.stride = 2});
  REQUIRE(y.shape() == Shape{1, 2});
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == 0.0);
}

TEST_CASE("conv1d matches nested-loop oracle") {
  std::mt19937_64 rng(7);
  Tensor x = RandomTensor({3, 64}, rng);
  Tensor k = RandomTensor({8, 3, 3}, rng);
  for (auto [stride, pl, pr] : {std::tuple{1, 0, 0}, {1, 8, 0}, {1, 4, 4}, {3, 2, 5}}) {
    Tensor y = Conv1d(x, k, {.stride = stride, .dilation = 4, .pad_left = pl, .pad_right = pr});
    const auto ref = NestedLoopConv(x, k, stride, 4, pl, pr);
    REQUIRE(static_cast<size_t>(y.numel()) == ref.size());
    CHECK(MaxRelDiff(y.data(), ref) < 1e-12);
  }
  // Long strided kernel path.
  Tensor xs = RandomTensor({1, 300}, rng);
  Tensor ks = RandomTensor({5, 1, 64}, rng);
  Tensor ys = Conv1d(xs, ks, {.stride = 20});
  CHECK(MaxRelDiff(ys.data(), NestedLoopConv(xs, ks, 20, 1, 0, 0)) < 1e-12);
}

TEST_CASE("conv1d rejects channel mismatch") {
  Tensor x = Tensor::Zeros({2, 10});
  Tensor k = Tensor::Zeros({4, 3, 3});
  CHECK_THROWS_AS(Conv1d(x, k), DimensionError);
}

TEST_CASE("conv_transpose1d scatter and overlap-add") {
  Tensor one = Tensor::FromData({1, 1}, std::vector<double>{1});
  Tensor k3 = Tensor::FromData({1, 1, 3}, std::vector<double>{1, 2, 3});
  CHECK(ConvTranspose1d(one, k3, 1).values() == std::vector<double>{1, 2, 3});
  Tensor two = Tensor::FromData({1, 2}, std::vector<double>{1, 1});
  Tensor k2 = Tensor::FromData({1, 1, 2}, std::vector<double>{1, 1});
  CHECK(ConvTranspose1d(two, k2, 1).values() == std::vector<double>{1, 2, 1});
}

TEST_CASE("conv_transpose1d is the adjoint of conv1d") {
  std::mt19937_64 rng(11);
  for (auto [cin, cout, k, stride, frames] :
       {std::tuple{1, 5, 16, 4, 9}, {3, 2, 5, 1, 20}, {4, 6, 8, 8, 7}, {2, 3, 6, 3, 11}}) {
    const int64_t t = (frames - 1) * stride + k;
    Tensor x = RandomTensor({cin, t}, rng);
    Tensor kern = RandomTensor({cout, cin, k}, rng);
    Tensor y = RandomTensor({cout, frames}, rng);
    const double lhs = sepkit::testing::Dot(Conv1d(x, kern, {.stride = stride}).values(), y.values());
    const double rhs = sepkit::testing::Dot(x.values(), ConvTranspose1d(y, kern, stride).values());
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
  }
}

TEST_CASE("pointwise values") {
  Tensor x = Tensor::FromData({2}, std::vector<double>{-2, 3});
  CHECK(Relu(x).values() == std::vector<double>{0, 3});
  Tensor neg = Tensor::FromData({1, 1}, std::vector<double>{-4});
  Tensor alpha = Tensor::FromData({1}, std::vector<double>{0.25});
  CHECK(Prelu(neg, alpha).item() == -1.0);
  CHECK(Atan2(Tensor::Scalar(4), Tensor::Scalar(3)).item() == doctest::Approx(0.92729522).epsilon(1e-8));
  CHECK(Atan2(Tensor::Scalar(0), Tensor::Scalar(0)).item() == 0.0);
  CHECK(Sigmoid(Tensor::Scalar(0)).item() == 0.5);
}

TEST_CASE("division by exact zero names the operand location") {
  Tensor a = Tensor::FromData({3}, std::vector<double>{1, 2, 3});
  Tensor b = Tensor::FromData({3}, std::vector<double>{1, 0, 1});
  try {
    Div(a, b);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}

TEST_CASE("overflow is an error, not a value") {
  Tensor big = Tensor::Scalar(1e200);
  CHECK_THROWS_AS(Mul(big, big), NumericError);
}

TEST_CASE("normalize matches two-pass statistics") {
  std::mt19937_64 rng(5);
  Tensor x = RandomTensor({4, 16}, rng, -3.0, 5.0);
  Tensor scale = Tensor::Full({4}, 1.0), shift = Tensor::Zeros({4});

  SUBCASE("global layer norm has zero mean, unit variance") {
    std::mt19937_64 wide_rng(6);
    Tensor wide = RandomTensor({4, 16}, wide_rng, -10.0, 20.0);
    Tensor yw = Normalize(wide, NormKind::kGlobalLayer, scale, shift, true);
    double mean = 0, var = 0;
    for (double v : yw.values()) mean += v;
    mean /= 64;
    for (double v : yw.values()) var += (v - mean) * (v - mean);
    var /= 64;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-6);
    Tensor y = Normalize(x, NormKind::kGlobalLayer, scale, shift, true);
    mean = 0;
    var = 0;
    for (double v : y.values()) mean += v;
    mean /= 64;
    for (double v : y.values()) var += (v - mean) * (v - mean);
    var /= 64;
    CHECK(std::abs(mean) < 1e-6);
    double m = 0, s2 = 0;
    for (double v : x.values()) m += v;
    m /= 64;
    for (double v : x.values()) s2 += (v - m) * (v - m);
    s2 /= 64;
    for (int i = 0; i < 64; ++i) CHECK(y[i] == doctest::Approx((x[i] - m) / std::sqrt(s2 + 1e-5)).epsilon(1e-12));
  }
  SUBCASE("channel layer norm per frame") {
    Tensor y = Normalize(x, NormKind::kChannelLayer, scale, shift, true);
    for (int t = 0; t < 16; ++t) {
      double m = 0, s2 = 0;
      for (int c = 0; c < 4; ++c) m += x[c * 16 + t];
      m /= 4;
      for (int c = 0; c < 4; ++c) s2 += (x[c * 16 + t] - m) * (x[c * 16 + t] - m);
      s2 /= 4;
      for (int c = 0; c < 4; ++c)
        CHECK(y[c * 16 + t] == doctest::Approx((x[c * 16 + t] - m) / std::sqrt(s2 + 1e-5)).epsilon(1e-12));
    }
  }
  SUBCASE("batch norm per channel and running statistics") {
    BatchNormState state;
    Tensor y = Normalize(x, NormKind::kBatch, scale, shift, true, &state);
    for (int c = 0; c < 4; ++c) {
      double m = 0, s2 = 0;
      for (int t = 0; t < 16; ++t) m += x[c * 16 + t];
      m /= 16;
      for (int t = 0; t < 16; ++t) s2 += (x[c * 16 + t] - m) * (x[c * 16 + t] - m);
      CHECK(y[c * 16] == doctest::Approx((x[c * 16] - m) / std::sqrt(s2 / 16 + 1e-5)).epsilon(1e-12));
      CHECK(state.running_mean[c] == doctest::Approx(0.1 * m));
      CHECK(state.running_var[c] == doctest::Approx(0.9 + 0.1 * s2 / 15));
    }
    Tensor inf = Normalize(x, NormKind::kBatch, scale, shift, false, &state);
    CHECK(inf[0] == doctest::Approx((x[0] - state.running_mean[0]) /
                                    std::sqrt(state.running_var[0] + 1e-5)));
  }
  SUBCASE("constant input maps to shift") {
    Tensor c = Tensor::Full({4, 16}, 2.5);
    Tensor sh = Tensor::FromData({4}, std::vector<double>{1, 2, 3, 4});
    for (NormKind kind : {NormKind::kGlobalLayer, NormKind::kChannelLayer, NormKind::kBatch}) {
      Tensor y = Normalize(c, kind, scale, sh, true);
      for (int i = 0; i < 64; ++i) CHECK(y[i] == doctest::Approx(sh[i / 16]));
    }
  }
}

TEST_CASE("backward analytic cases") {
  Tensor x = Tensor::FromData({2}, std::vector<double>{1, 2}).set_requires_grad(true);
  {
    Tape tape;
    Tape::Scope scope(tape);
    Backward(Sum(Square(x)));
    CHECK(x.grad() == std::vector<double>{2, 4});
  }
  x.zero_grad();
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor other = Tensor::FromData({2}, std::vector<double>{3, 4}).set_requires_grad(true);
    Backward(Sum(Square(other)));
    CHECK(x.grad() == std::vector<double>{0, 0});
  }
}

TEST_CASE("backward on a non-scalar is a usage error") {
  Tensor x = Tensor::FromData({2}, std::vector<double>{1, 2}).set_requires_grad(true);
  Tape tape;
  Tape::Scope scope(tape);
  CHECK_THROWS_AS(tape.Backward(Square(x)), UsageError);
}

TEST_CASE("tape visits every recorded op exactly once") {
  std::mt19937_64 rng(3);
  Tensor x = RandomTensor({2, 8}, rng).set_requires_grad(true);
  Tensor k = RandomTensor({3, 2, 3}, rng).set_requires_grad(true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor loss = Mean(Square(Relu(Conv1d(x, k, {.pad_left = 2}))));
  REQUIRE(tape.size() == 4);
  tape.Backward(loss);
  CHECK(tape.backward_visits() == tape.size());
}

TEST_CASE("every primitive passes the finite-difference check") {
  auto pos = [](std::mt19937_64& r) { return RandomTensor({3, 7}, r, 0.5, 2.0); };
  auto any = [](std::mt19937_64& r) { return RandomTensor({3, 7}, r); };
  CheckPrimitive("relu", [](const Tensor& x) { return Relu(x); }, any);
  CheckPrimitive("sigmoid", [](const Tensor& x) { return Sigmoid(x); }, any);
  CheckPrimitive("sqrt", [](const Tensor& x) { return Sqrt(x); }, pos);
  CheckPrimitive("square", [](const Tensor& x) { return Square(x); }, any);
  CheckPrimitive("cos", [](const Tensor& x) { return Cos(x); }, any);
  CheckPrimitive("sin", [](const Tensor& x) { return Sin(x); }, any);
  CheckPrimitive("log", [](const Tensor& x) { return Log(x); }, pos);
  CheckPrimitive("sum", [](const Tensor& x) { return Sum(Square(x)); }, any);
  CheckPrimitive("mean", [](const Tensor& x) { return Mean(Square(x)); }, any);
  CheckPrimitive("mul_scalar", [](const Tensor& x) { return MulScalar(x, -3.5); }, any);
  CheckPrimitive("add_scalar", [](const Tensor& x) { return Square(AddScalar(x, 0.7)); }, any);
  CheckPrimitive("reshape", [](const Tensor& x) { return Square(Reshape(x, {7, 3})); }, any);
  CheckPrimitive("slice_rows", [](const Tensor& x) { return Square(SliceRows(x, 1, 2)); }, any);
  CheckPrimitive("slice_last", [](const Tensor& x) { return Square(SliceLast(x, 2, 4)); }, any);
  CheckPrimitive("pad_last", [](const Tensor& x) { return Square(PadLast(x, 2, 3)); }, any);

  std::mt19937_64 fixed(77);
  const Tensor other = RandomTensor({3, 7}, fixed, 0.5, 2.0);
  const Tensor scalar = Tensor::Scalar(1.7);
  const Tensor chan = RandomTensor({3}, fixed, 0.5, 1.5);
  const Tensor trail = RandomTensor({7}, fixed);
  for (bool first : {true, false}) {
    auto bin = [&](auto op, const Tensor& b) {
      return [=](const Tensor& x) { return first ? op(x, b) : op(b, x); };
    };
    CheckPrimitive("add", bin(Add, other), any);
    CheckPrimitive("sub", bin(Sub, other), any);
    CheckPrimitive("mul", bin(Mul, other), any);
    CheckPrimitive("mul_bcast", bin(Mul, scalar), any);
    CheckPrimitive("div", bin(Div, other), pos);
    CheckPrimitive("atan2", bin(Atan2, other), any);
  }
  CheckPrimitive("mul_channel", [&](const Tensor& x) { return MulChannel(x, chan); }, any);
  CheckPrimitive("mul_channel_v", [&](const Tensor& v) { return MulChannel(other, SliceLast(v, 0, 1)); }, any);
  CheckPrimitive("add_channel", [&](const Tensor& v) { return Square(AddChannel(other, SliceLast(v, 0, 1))); }, any);
  CheckPrimitive("mul_trailing", [&](const Tensor& x) { return MulTrailing(x, trail); }, any);
  CheckPrimitive("mul_trailing_v", [&](const Tensor& v) { return MulTrailing(other, SliceRows(v, 0, 1)); }, any);
  CheckPrimitive("prelu", [&](const Tensor& x) { return Prelu(x, chan); }, any);
  CheckPrimitive("prelu_alpha", [&](const Tensor& a) { return Prelu(MulScalar(other, -1.0), SliceLast(a, 0, 1)); }, any);
  CheckPrimitive("concat", [&](const Tensor& x) {
    const Tensor parts[] = {x, other, x};
    return Square(Concat(parts));
  }, any);

  const Tensor kern = RandomTensor({4, 3, 3}, fixed);
  const Tensor dw = RandomTensor({3, 1, 3}, fixed);
  const Tensor tk = RandomTensor({3, 2, 4}, fixed);
  CheckPrimitive("conv1d_x", [&](const Tensor& x) {
    return Conv1d(x, kern, {.stride = 2, .dilation = 2, .pad_left = 3, .pad_right = 1});
  }, any);
  CheckPrimitive("conv1d_w", [&](const Tensor& w) {
    return Conv1d(other, Reshape(SliceLast(w, 0, 6), {2, 3, 3}), {.dilation = 2, .pad_left = 4});
  }, any);
  CheckPrimitive("depthwise_x", [&](const Tensor& x) { return DepthwiseConv1d(x, dw, 2, 4, 0); }, any);
  CheckPrimitive("depthwise_w", [&](const Tensor& w) {
    return DepthwiseConv1d(other, Reshape(SliceLast(w, 0, 3), {3, 1, 3}), 1, 1, 1);
  }, any);
  CheckPrimitive("conv_transpose_x", [&](const Tensor& x) { return ConvTranspose1d(x, tk, 3); }, any);
  CheckPrimitive("conv_transpose_w", [&](const Tensor& w) {
    return ConvTranspose1d(other, Reshape(SliceLast(w, 0, 2), {3, 2, 1}), 2);
  }, any);

  const Tensor sc = RandomTensor({3}, fixed, 0.5, 1.5), sh = RandomTensor({3}, fixed);
  for (NormKind kind : {NormKind::kGlobalLayer, NormKind::kChannelLayer, NormKind::kBatch}) {
    CheckPrimitive("normalize_x", [&](const Tensor& x) { return Normalize(x, kind, sc, sh, true); }, any);
    CheckPrimitive("normalize_affine", [&](const Tensor& p) {
      return Normalize(other, kind, SliceLast(p, 0, 1), SliceLast(p, 1, 1), true);
    }, any);
  }
  BatchNormState frozen{{0.1, -0.2, 0.3}, {1.5, 0.7, 2.0}, 0.1};
  CheckPrimitive("normalize_bn_inference", [&](const Tensor& x) {
    return Normalize(x, NormKind::kBatch, sc, sh, false, &frozen);
  }, any);
}

TEST_CASE("adam recurrence") {
  SUBCASE("zero gradient leaves parameters and moments unchanged") {
    Parameter p("w", Tensor::FromData({2}, std::vector<double>{0.3, -0.7}));
    Parameter* ps[] = {&p};
    AdamStep(ps, {});
    CHECK(p.value.values() == std::vector<double>{0.3, -0.7});
    CHECK(p.first_moment == std::vector<double>{0, 0});
    CHECK(p.second_moment == std::vector<double>{0, 0});
  }
  SUBCASE("one and two steps with unit gradient") {
    Parameter p("w", Tensor::Scalar(0.0));
    Parameter* ps[] = {&p};
    p.value.impl()->EnsureGrad()[0] = 1.0;
    AdamStep(ps, {.lr = 0.001});
    // m = 0.1, v = 0.001, m_hat = v_hat = 1.
    const double one_step = -0.001 / (1.0 + 1e-8);
    CHECK(p.value.item() == doctest::Approx(one_step).epsilon(1e-14));
    AdamStep(ps, {.lr = 0.001});
    // m = 0.19, v = 0.001999, bias corrections 0.19 and 0.001999.
    const double m2 = 0.9 * 0.1 + 0.1, v2 = 0.999 * 0.001 + 0.001;
    const double second = -0.001 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.998001)) + 1e-8);
    CHECK(p.value.item() == doctest::Approx(one_step + second).epsilon(1e-14));
    CHECK(p.step == 2);
  }
}

TEST_CASE("identical seeds give bit-identical outputs") {
  auto run = [] {
    std::mt19937_64 rng(42);
    Tensor x = RandomTensor({2, 32}, rng);
    Tensor k = FanInUniform({4, 2, 3}, 6, rng);
    return Normalize(Conv1d(x, k, {.dilation = 2, .pad_left = 4}), NormKind::kGlobalLayer,
                     Tensor::Full({4}, 1.0), Tensor::Zeros({4}), true)
        .values();
  };
  CHECK(run() == run());
}
