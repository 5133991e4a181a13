#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "a2net/diffcore/ops.hpp"
#include "a2net/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace a2net {
namespace {

using diff::ConvSpec;
using diff::Shape;
using diff::Tensor;
using testing::random_tensor;

Tensor<float> filled(Shape s, float v) { return Tensor<float>(s, v); }

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
  return acc;
}

TEST(Conv2d, IdentityKernelReproducesInput) {
  const auto x = random_tensor({1, 1, 4, 4}, 1);
  const ConvSpec spec{1, 1, 1, 1, 1, 0};
  const auto y = diff::conv2d(x, filled({1, 1, 1, 1}, 1.0f), filled({1, 1, 1, 1}, 0.0f), spec);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2d, OnesKernelCountsOverlap) {
  const ConvSpec spec{1, 1, 3, 3, 1, 1};
  const auto y = diff::conv2d(filled({1, 1, 4, 4}, 1.0f), filled({1, 1, 3, 3}, 1.0f),
                              filled({1, 1, 1, 1}, 0.0f), spec);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0f);
  EXPECT_EQ(y.at(0, 0, 0, 3), 4.0f);
  EXPECT_EQ(y.at(0, 0, 3, 3), 4.0f);
  EXPECT_EQ(y.at(0, 0, 0, 1), 6.0f);
  EXPECT_EQ(y.at(0, 0, 1, 1), 9.0f);
  EXPECT_EQ(y.at(0, 0, 2, 2), 9.0f);
}

TEST(Conv2d, MatchesDirectOracle) {
  for (const ConvSpec spec : {ConvSpec{5, 3, 3, 3, 1, 1}, ConvSpec{5, 3, 3, 3, 1, 0},
                              ConvSpec{4, 3, 4, 4, 2, 1}, ConvSpec{2, 3, 1, 1, 1, 0}}) {
    const auto x = random_tensor({2, 3, 8, 8}, 2);
    const auto w = random_tensor({spec.out_channels, 3, spec.kernel_h, spec.kernel_w}, 3);
    const auto b = random_tensor({1, spec.out_channels, 1, 1}, 4);
    const auto y = diff::conv2d(x, w, b, spec);
    const auto ref = testing::direct_conv2d(x, w, b, spec);
    ASSERT_EQ(y.numel(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-5);
  }
}

TEST(Conv2d, LargeInputCrossesColumnBlocks) {
  // Big enough that the column buffer is processed in several row blocks.
  const ConvSpec spec{4, 8, 3, 3, 1, 1};
  const auto x = random_tensor({1, 8, 96, 80}, 5);
  const auto w = random_tensor({4, 8, 3, 3}, 6);
  const auto b = random_tensor({1, 4, 1, 1}, 7);
  const auto y = diff::conv2d(x, w, b, spec);
  const auto ref = testing::direct_conv2d(x, w, b, spec);
  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y.data()[i], ref[i], 1e-4);
}

TEST(Conv2d, RejectsBadShapes) {
  const ConvSpec spec{2, 3, 3, 3, 1, 1};
  const auto b = filled({1, 2, 1, 1}, 0.0f);
  EXPECT_THROW(diff::conv2d(filled({1, 4, 8, 8}, 0), filled({2, 3, 3, 3}, 0), b, spec),
               ShapeError);
  EXPECT_THROW(diff::conv2d(filled({1, 3, 8, 8}, 0), filled({2, 3, 5, 5}, 0), b, spec),
               ShapeError);
  EXPECT_THROW(diff::conv2d(filled({1, 3, 8, 8}, 0), filled({2, 3, 3, 3}, 0),
                            filled({1, 3, 1, 1}, 0), spec),
               ShapeError);
  const ConvSpec huge{1, 3, 9, 9, 1, 0};
  EXPECT_THROW(diff::conv2d(filled({1, 3, 4, 4}, 0), filled({1, 3, 9, 9}, 0),
                            filled({1, 1, 1, 1}, 0), huge),
               ShapeError);
}

TEST(ConvTranspose2d, ShapeFormula) {
  const ConvSpec spec{1, 1, 2, 2, 2, 0};
  const auto y = diff::conv_transpose2d(filled({1, 1, 4, 4}, 1.0f), filled({1, 1, 2, 2}, 1.0f),
                                        filled({1, 1, 1, 1}, 0.0f), spec);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 8, 8}));
}

TEST(ConvTranspose2d, QuarterKernelPartitionsOutput) {
  const ConvSpec spec{1, 1, 2, 2, 2, 0};
  const auto y = diff::conv_transpose2d(filled({1, 1, 4, 4}, 0.8f), filled({1, 1, 2, 2}, 0.25f),
                                        filled({1, 1, 1, 1}, 0.0f), spec);
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.2f);
}

TEST(ConvTranspose2d, IsAdjointOfConv2d) {
  // <conv(x), y> == <x, conv^T(y)> with the same weight and zero bias.
  for (const ConvSpec spec : {ConvSpec{4, 3, 3, 3, 1, 1}, ConvSpec{4, 3, 4, 4, 2, 1},
                              ConvSpec{4, 3, 2, 2, 2, 0}}) {
    const auto x = random_tensor({2, 3, 8, 8}, 11);
    const auto w = random_tensor({4, 3, spec.kernel_h, spec.kernel_w}, 12);
    const auto y0 = diff::conv2d(x, w, filled({1, 4, 1, 1}, 0), spec);
    const auto y = random_tensor(y0.shape(), 13);
    const auto xt = diff::conv_transpose2d(y, w, filled({1, 3, 1, 1}, 0), spec.mirrored());
    ASSERT_EQ(xt.shape(), x.shape());
    const double lhs = dot(y0.data(), y.data());
    const double rhs = dot(x.data(), xt.data());
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Concat, SingleInputUnchanged) {
  const auto a = random_tensor({2, 3, 4, 4}, 1);
  const std::vector<Tensor<float>> in{a};
  const auto y = diff::concat_channels<float>(in);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(y.data()[i], a.data()[i]);
}

TEST(Concat, StacksChannelsInOrder) {
  const auto a = random_tensor({2, 2, 3, 3}, 1);
  const auto b = random_tensor({2, 3, 3, 3}, 2);
  const std::vector<Tensor<float>> in{a, b};
  const auto y = diff::concat_channels<float>(in);
  ASSERT_EQ(y.shape(), (Shape{2, 5, 3, 3}));
  EXPECT_EQ(y.at(1, 0, 2, 1), a.at(1, 0, 2, 1));
  EXPECT_EQ(y.at(1, 1, 0, 0), a.at(1, 1, 0, 0));
  EXPECT_EQ(y.at(1, 4, 1, 2), b.at(1, 2, 1, 2));
}

TEST(Concat, GradientOfSumIsOnes) {
  auto a = random_tensor({1, 2, 3, 3}, 1);
  auto b = random_tensor({1, 3, 3, 3}, 2);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  const std::vector<Tensor<float>> in{a, b};
  const auto y = diff::concat_channels<float>(in);
  diff::scale(diff::mean(y), float(y.numel())).backward();
  for (float g : a.grad()) EXPECT_FLOAT_EQ(g, 1.0f);
  for (float g : b.grad()) EXPECT_FLOAT_EQ(g, 1.0f);
}

TEST(Activations, ReluAndTanhValues) {
  const Tensor<float> x({1, 1, 1, 3}, std::vector<float>{-1.0f, 0.0f, 2.0f});
  const auto r = diff::relu(x);
  EXPECT_EQ(r.data()[0], 0.0f);
  EXPECT_EQ(r.data()[1], 0.0f);
  EXPECT_EQ(r.data()[2], 2.0f);
  EXPECT_EQ(diff::tanh_act(Tensor<float>({1, 1, 1, 1}, 0.0f)).item(), 0.0f);
}

TEST(Activations, TanhGradientMatchesFiniteDifferences) {
  auto x = random_tensor<double>({1, 1, 4, 5}, 3, -2.0, 2.0);
  x.set_requires_grad(true);
  diff::mean(diff::tanh_act(x)).backward();
  std::vector<double> values(x.data().begin(), x.data().end());
  const auto numeric = testing::central_differences(
      values,
      [&] {
        double s = 0.0;
        for (double v : values) s += std::tanh(v);
        return s / double(values.size());
      },
      1e-5);
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_LT(testing::relative_error(x.grad()[i], numeric[i]), 1e-3);
  }
}

TEST(Elementwise, MeanAddScale) {
  EXPECT_FLOAT_EQ(diff::mean(filled({2, 3, 4, 5}, 0.37f)).item(), 0.37f);
  const auto x = random_tensor({1, 2, 3, 3}, 4);
  for (float v : testing::values(diff::add(x, diff::scale(x, -1.0f)))) EXPECT_EQ(v, 0.0f);
  auto y = random_tensor({1, 2, 3, 3}, 5);
  y.set_requires_grad(true);
  diff::mean(y).backward();
  for (float g : y.grad()) EXPECT_FLOAT_EQ(g, 1.0f / 18.0f);
  EXPECT_THROW(diff::add(x, filled({1, 2, 3, 4}, 0)), ShapeError);
}

TEST(Backward, LinearConvGradientIsInputSum) {
  // d mean(W * x) / dW[o, c, ky, kx] for a 1x1 kernel is mean over pixels of x[c] / O.
  const auto x = random_tensor({2, 3, 5, 5}, 6);
  auto w = random_tensor({2, 3, 1, 1}, 7);
  w.set_requires_grad(true);
  const ConvSpec spec{2, 3, 1, 1, 1, 0};
  diff::mean(diff::conv2d(x, w, filled({1, 2, 1, 1}, 0), spec)).backward();
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 25; ++i) s += x.data()[(n * 3 + c) * 25 + i];
    const double expected = s / (2.0 * 2.0 * 25.0);
    EXPECT_NEAR(w.grad()[c], expected, 1e-6);
    EXPECT_NEAR(w.grad()[3 + c], expected, 1e-6);
  }
}

TEST(Backward, ConstantLossGivesZeroGradient) {
  auto w = random_tensor({2, 3, 3, 3}, 8);
  w.set_requires_grad(true);
  const auto x = filled({1, 3, 6, 6}, 0.0f);
  const ConvSpec spec{2, 3, 3, 3, 1, 1};
  diff::mean(diff::conv2d(x, w, filled({1, 2, 1, 1}, 0.5f), spec)).backward();
  for (float g : w.grad()) EXPECT_EQ(g, 0.0f);
}

TEST(Backward, ConvGradientsMatchFiniteDifferencesInDouble) {
  const ConvSpec spec{2, 2, 4, 4, 2, 1};
  auto x = random_tensor<double>({1, 2, 6, 6}, 9);
  auto w = random_tensor<double>({2, 2, 4, 4}, 10);
  auto b = random_tensor<double>({1, 2, 1, 1}, 11);
  const auto target = random_tensor<double>({1, 2, 3, 3}, 12);
  for (auto* t : {&x, &w, &b}) t->set_requires_grad(true);
  const auto loss = [&] {
    const auto y = diff::conv2d(x, w, b, spec);
    const auto d = diff::sub(y, target);
    return diff::mean(diff::mul(d, d));
  };
  loss().backward();
  diff::NoGradGuard guard;
  for (auto* t : {&x, &w, &b}) {
    std::vector<double> values(t->data().begin(), t->data().end());
    const auto numeric = testing::central_differences(
        values,
        [&] {
          std::copy(values.begin(), values.end(), t->mutable_data().begin());
          return loss().item();
        },
        1e-6);
    std::copy(values.begin(), values.end(), t->mutable_data().begin());
    for (std::size_t i = 0; i < values.size(); ++i) {
      EXPECT_NEAR(t->grad()[i], numeric[i], 1e-8 + 1e-6 * std::abs(numeric[i]));
    }
  }
}

TEST(Backward, RejectsNonScalarAndDetachedLosses) {
  auto x = random_tensor({1, 1, 2, 2}, 1);
  x.set_requires_grad(true);
  EXPECT_THROW(diff::relu(x).backward(), ShapeError);
  EXPECT_THROW(diff::mean(random_tensor({1, 1, 2, 2}, 2)).backward(), Error);
}

TEST(NoGrad, GuardSuppressesRecording) {
  auto x = random_tensor({1, 1, 2, 2}, 1);
  x.set_requires_grad(true);
  diff::NoGradGuard guard;
  EXPECT_FALSE(diff::mean(x).requires_grad());
}

}  // namespace
}  // namespace a2net
