#include <gtest/gtest.h>

#include <cmath>

#include "convlab/gradcheck.hpp"
#include "convlab/gradcheck_suite.hpp"
#include "convlab/ops.hpp"
#include "convlab/rng.hpp"

using namespace convlab;

namespace {

template <typename T> Tensor<T> random_tensor(Shape s, Rng &rng, double scale = 1.0) {
  Tensor<T> t(std::move(s));
  for (auto &v : t.data()) v = T(scale * rng.normal());
  return t;
}

template <typename T> Var<T> param(Tensor<T> t) { return Var<T>::leaf(std::move(t), true); }

} // namespace

TEST(Conv2d, HandComputedValidCorrelation) {
  // 1x1x3x3 input, 1x1x2x2 kernel, no flip.
  Tensor<double> x(Shape{1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> w(Shape{1, 1, 2, 2}, std::vector<double>{1, 0, 0, -1});
  Tensor<double> b(Shape{1}, std::vector<double>{0.5});
  for (auto algo : {ConvAlgo::direct, ConvAlgo::im2col}) {
    auto y = conv2d(Var<double>::leaf(x), {param(w), param(b)}, algo);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y.value()[i], -4 + 0.5);
  }
}

TEST(Conv2d, PaddingPreservesExtent) {
  Rng rng(3);
  auto x = random_tensor<float>({2, 3, 5, 7}, rng);
  auto y = conv2d(Var<float>::leaf(x),
                  {param(random_tensor<float>({4, 3, 3, 3}, rng)), param(Tensor<float>(Shape{4})), 1, 1});
  EXPECT_EQ(y.shape(), (Shape{2, 4, 5, 7}));
}

TEST(Conv2d, DirectAndIm2colAgree) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(3), c = 1 + rng.below(4), o = 1 + rng.below(4);
    const std::size_t kt = 1 + rng.below(3), kf = 1 + rng.below(3);
    const std::size_t pt = rng.below(kt), pf = rng.below(kf);
    const std::size_t t = kt + rng.below(5), f = kf + rng.below(6);
    auto x = random_tensor<float>({n, c, t, f}, rng);
    auto w = random_tensor<float>({o, c, kt, kf}, rng);
    auto b = random_tensor<float>({o}, rng);
    std::vector<Tensor<float>> outs, gx, gw, gb;
    for (auto algo : {ConvAlgo::direct, ConvAlgo::im2col}) {
      auto xv = param(x), wv = param(w), bv = param(b);
      auto y = conv2d(xv, {wv, bv, pt, pf}, algo);
      Tensor<float> proj(y.shape());
      Rng pr(trial);
      for (auto &v : proj.data()) v = float(pr.normal());
      backward(weighted_sum(y, proj));
      outs.push_back(y.value());
      gx.push_back(Tensor<float>(x.shape(), std::vector<float>(xv.grad().begin(), xv.grad().end())));
      gw.push_back(Tensor<float>(w.shape(), std::vector<float>(wv.grad().begin(), wv.grad().end())));
      gb.push_back(Tensor<float>(b.shape(), std::vector<float>(bv.grad().begin(), bv.grad().end())));
    }
    auto close = [](const Tensor<float> &a, const Tensor<float> &b) {
      for (std::size_t i = 0; i < a.numel(); ++i)
        EXPECT_NEAR(a[i], b[i], 1e-5 * std::max(1.0f, std::abs(a[i])));
    };
    close(outs[0], outs[1]);
    close(gx[0], gx[1]);
    close(gw[0], gw[1]);
    close(gb[0], gb[1]);
  }
}

TEST(Conv2d, ErrorsNameTheAxis) {
  Tensor<float> x(Shape{1, 2, 4, 4});
  try {
    conv2d(Var<float>::leaf(x), {param(Tensor<float>(Shape{1, 3, 2, 2})), param(Tensor<float>(Shape{1}))});
    FAIL();
  } catch (const DimensionError &e) {
    EXPECT_NE(std::string(e.what()).find("input maps"), std::string::npos) << e.what();
  }
  try {
    conv2d(Var<float>::leaf(x), {param(Tensor<float>(Shape{1, 2, 5, 2})), param(Tensor<float>(Shape{1}))});
    FAIL();
  } catch (const GeometryError &e) {
    EXPECT_NE(std::string(e.what()).find("time"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(Var<float>::leaf(x),
                      {param(Tensor<float>(Shape{1, 2, 2, 2})), param(Tensor<float>(Shape{2}))}),
               DimensionError);
}

TEST(MaxPool, FloorExtentsAndValues) {
  Tensor<double> x(Shape{1, 1, 3, 5});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = double(i);
  auto y = maxpool2d(Var<double>::leaf(x), {2, 2});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(y.value()[0], 6);
  EXPECT_DOUBLE_EQ(y.value()[1], 8);
  EXPECT_THROW(maxpool2d(Var<double>::leaf(x), {4, 1}), GeometryError);
}

TEST(MaxPool, GradientRoutesToExactlyOneInputPerWindow) {
  Rng rng(5);
  auto x = param(random_tensor<double>({2, 3, 6, 9}, rng));
  auto y = maxpool2d(x, {2, 3});
  backward(sum(y));
  std::size_t nonzero = 0;
  double total = 0;
  for (double g : x.grad()) {
    nonzero += g != 0.0;
    total += g;
  }
  EXPECT_EQ(nonzero, y.value().numel());
  EXPECT_DOUBLE_EQ(total, double(y.value().numel()));
}

TEST(MaxPool, TiesGoToFirstInScanOrder) {
  auto x = param(Tensor<double>(Shape{1, 1, 2, 2}, 1.0));
  backward(sum(maxpool2d(x, {2, 2})));
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[1] + x.grad()[2] + x.grad()[3], 0.0);
}

TEST(Relu, ForwardAndSubgradientAtZero) {
  auto x = param(Tensor<double>(Shape{4}, std::vector<double>{-1, 0, 2, -0.0}));
  auto y = relu(x);
  EXPECT_EQ(std::vector<double>(y.value().data().begin(), y.value().data().end()),
            (std::vector<double>{0, 0, 2, 0}));
  backward(sum(y));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()),
            (std::vector<double>{0, 0, 1, 0}));
}

TEST(Affine, MatchesManualProduct) {
  Tensor<double> x(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor<double> w(Shape{3, 2}, std::vector<double>{1, 0, 0, 1, 1, 1});
  Tensor<double> b(Shape{2}, std::vector<double>{10, 20});
  auto y = affine(Var<double>::leaf(x), param(w), param(b));
  EXPECT_EQ(std::vector<double>(y.value().data().begin(), y.value().data().end()),
            (std::vector<double>{14, 25, 20, 31}));
  EXPECT_THROW(affine(Var<double>::leaf(x), param(Tensor<double>(Shape{2, 2})), param(b)),
               DimensionError);
}

TEST(Flatten, KeepsBatchAxis) {
  auto y = flatten(Var<float>::leaf(Tensor<float>(Shape{3, 2, 4, 5})));
  EXPECT_EQ(y.shape(), (Shape{3, 40}));
}

TEST(SoftmaxXent, RowsSumToOne) {
  Rng rng(9);
  auto logits = random_tensor<double>({16, 7}, rng, 20.0);
  std::vector<std::uint32_t> t(16);
  for (auto &v : t) v = std::uint32_t(rng.below(7));
  auto out = softmax_xent<double>(Var<double>::leaf(logits), t);
  for (std::size_t r = 0; r < 16; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 7; ++k) {
      EXPECT_GE(out.probs.at({r, k}), 0.0);
      s += out.probs.at({r, k});
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftmaxXent, SaturatedLogitsKeepPrecision) {
  // Independent oracle: log(1 + e^-20) in long double.
  const long double expected = std::log1p(std::exp(-20.0L));
  std::vector<std::uint32_t> t{0};
  auto d = softmax_xent<double>(
      Var<double>::leaf(Tensor<double>(Shape{1, 2}, std::vector<double>{10, -10})), t);
  EXPECT_NEAR(d.loss.value()[0], double(expected), 1e-22);
  EXPECT_NEAR(d.loss.value()[0], 2.0611536203143807e-9, 1e-20);
  auto f = softmax_xent<float>(
      Var<float>::leaf(Tensor<float>(Shape{1, 2}, std::vector<float>{10, -10})), t);
  EXPECT_GT(f.loss.value()[0], 0.0f);
  EXPECT_NEAR(f.loss.value()[0], float(expected), 1e-15);
}

TEST(SoftmaxXent, HugeLogitsStayFinite) {
  std::vector<std::uint32_t> t{1};
  auto d = softmax_xent<float>(
      Var<float>::leaf(Tensor<float>(Shape{1, 3}, std::vector<float>{1e30f, -1e30f, 0})), t);
  EXPECT_TRUE(std::isfinite(d.loss.value()[0]));
}

TEST(SoftmaxXent, UniformLogitsGiveLogK) {
  std::vector<std::uint32_t> t{3, 0};
  auto d = softmax_xent<double>(Var<double>::leaf(Tensor<double>(Shape{2, 5}, 0.0)), t);
  EXPECT_NEAR(d.loss.value()[0], std::log(5.0), 1e-14);
}

TEST(SoftmaxXent, TargetOutOfRange) {
  std::vector<std::uint32_t> t{0, 4};
  EXPECT_THROW(softmax_xent<double>(Var<double>::leaf(Tensor<double>(Shape{2, 4})), t),
               IndexError);
  std::vector<std::uint32_t> short_t{0};
  EXPECT_THROW(softmax_xent<double>(Var<double>::leaf(Tensor<double>(Shape{2, 4})), short_t),
               DimensionError);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // Forward doubles, backward claims triple.
  ScalarFn<double> bad = [](const Var<double> &x) {
    Tensor<double> y(x.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = 2 * x.value()[i];
    auto out = make_result<double>(std::move(y), {x}, [](Node<double> &self) {
      auto dx = grad_of(self.parents[0]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += 3 * self.value.grad()[i];
    });
    return sum(out);
  };
  EXPECT_GT(finite_diff_check<double>(bad, Tensor<double>(Shape{3}, 1.0)), 0.1);
}

TEST(GradCheck, SuiteSmallRun) {
  for (const auto &r : run_gradient_suite(5, 123)) {
    EXPECT_EQ(r.configs, 5u);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.primitive << " " << r.worst;
  }
}

TEST(SpecExamples, Conv) {
  auto ones = [](Shape s) { return Tensor<double>(std::move(s), 1.0); };
  auto y = conv2d(Var<double>::leaf(ones({1, 1, 3, 3})),
                  {param(ones({1, 1, 3, 3})), param(Tensor<double>(Shape{1}))});
  EXPECT_DOUBLE_EQ(y.value()[0], 9.0);

  Tensor<double> x(Shape{1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = double(i + 1);
  Tensor<double> center(Shape{1, 1, 3, 3});
  center.at({0, 0, 1, 1}) = 1.0;
  y = conv2d(Var<double>::leaf(x), {param(center), param(Tensor<double>(Shape{1}))});
  EXPECT_EQ(std::vector<double>(y.value().data().begin(), y.value().data().end()),
            (std::vector<double>{6, 7, 10, 11}));

  auto big = conv2d(Var<float>::leaf(Tensor<float>(Shape{1, 3, 17, 40})),
                    {param(Tensor<float>(Shape{64, 3, 3, 3})), param(Tensor<float>(Shape{64})), 1, 1});
  EXPECT_EQ(big.shape(), (Shape{1, 64, 17, 40}));
}

TEST(SpecExamples, Pool) {
  auto y = maxpool2d(Var<double>::leaf(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4})),
                     {2, 2});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 4.0);
  EXPECT_EQ(maxpool2d(Var<float>::leaf(Tensor<float>(Shape{1, 1, 1, 9})), {1, 3}).shape()[3], 3u);
  EXPECT_EQ(maxpool2d(Var<float>::leaf(Tensor<float>(Shape{1, 1, 17, 1})), {2, 1}).shape()[2], 8u);
}

TEST(SpecExamples, Relu) {
  auto neg = param(Tensor<double>(Shape{3}, -2.0));
  auto y = relu(neg);
  backward(sum(y));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(y.value()[i], 0.0);
    EXPECT_EQ(neg.grad()[i], 0.0);
  }
  auto pos = param(Tensor<double>(Shape{3}, std::vector<double>{1, 2, 3}));
  Tensor<double> w(Shape{3}, std::vector<double>{4, 5, 6});
  auto z = relu(pos);
  backward(weighted_sum(z, w));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(z.value()[i], pos.value()[i]);
    EXPECT_EQ(pos.grad()[i], w[i]);
  }
}

TEST(SpecExamples, Affine) {
  Tensor<double> eye(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
  auto y = affine(Var<double>::leaf(Tensor<double>(Shape{1, 2}, std::vector<double>{1, 2})),
                  param(eye), param(Tensor<double>(Shape{2}, 1.0)));
  EXPECT_EQ(y.value()[0], 2.0);
  EXPECT_EQ(y.value()[1], 3.0);
  Tensor<double> b(Shape{3}, std::vector<double>{7, 8, 9});
  auto z = affine(Var<double>::leaf(Tensor<double>(Shape{4, 5}, 3.0)),
                  param(Tensor<double>(Shape{5, 3})), param(b));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(z.value().at({r, c}), b[c]);
  auto big = affine(Var<float>::leaf(Tensor<float>(Shape{3, 4096})),
                    param(Tensor<float>(Shape{4096, 2048})), param(Tensor<float>(Shape{2048})));
  EXPECT_EQ(big.shape(), (Shape{3, 2048}));
}

TEST(SpecExamples, SoftmaxTwoClassUniform) {
  auto z = param(Tensor<double>(Shape{1, 2}));
  std::vector<std::uint32_t> t{0};
  auto out = softmax_xent<double>(z, t);
  EXPECT_NEAR(out.loss.value()[0], 0.693147, 1e-6);
  backward(out.loss);
  EXPECT_DOUBLE_EQ(z.grad()[0], -0.5);
  EXPECT_DOUBLE_EQ(z.grad()[1], 0.5);
}

TEST(SpecExamples, Backward) {
  auto x = param(Tensor<double>(Shape{1}, 3.0));
  backward(sum(mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  backward(sum(mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(SpecExamples, FiniteDiffSquare) {
  ScalarFn<double> f = [](const Var<double> &x) { return sum(mul(x, x)); };
  EXPECT_LT(finite_diff_check<double>(f, Tensor<double>(Shape{1}, 3.0), 1e-5), 1e-9);
}
