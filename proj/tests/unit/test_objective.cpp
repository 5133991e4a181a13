#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "a2net/diffcore/ops.hpp"
#include "a2net/errors.hpp"
#include "a2net/objective/objective.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace a2net {
namespace {

using diff::Shape;
using diff::Tensor;
using objective::LossMode;
using testing::random_tensor;

TEST(Mse, ValuesAndGradient) {
  const auto a = random_tensor({2, 3, 4, 4}, 1, 0.0, 1.0);
  EXPECT_EQ(objective::mse_loss(a, a).item(), 0.0f);
  const Tensor<float> b(a.shape(), 0.3f), c(a.shape(), 0.4f);
  EXPECT_NEAR(objective::mse_loss(b, c).item(), 0.01, 1e-7);

  auto x = random_tensor<double>({1, 2, 3, 3}, 2);
  const auto y = random_tensor<double>({1, 2, 3, 3}, 3);
  x.set_requires_grad(true);
  objective::mse_loss(x, y).backward();
  std::vector<double> values(x.data().begin(), x.data().end());
  const auto numeric = testing::central_differences(
      values,
      [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += std::pow(values[i] - y.data()[i], 2);
        return s / double(values.size());
      },
      1e-6);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double analytic = 2.0 * (x.data()[i] - y.data()[i]) / double(values.size());
    EXPECT_NEAR(x.grad()[i], analytic, 1e-12);
    EXPECT_NEAR(x.grad()[i], numeric[i], 1e-8);
  }
  EXPECT_THROW(objective::mse_loss(a, Tensor<float>({2, 3, 4, 5})), ShapeError);
}

TEST(Ssim, IdenticalInputsGiveZeroLoss) {
  const auto a = random_tensor({2, 3, 16, 16}, 4, 0.0, 1.0);
  EXPECT_NEAR(objective::ssim_loss(a, a).item(), 0.0, 1e-6);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = random_tensor({1, 1, 64, 64}, 10 + seed, 0.0, 1.0);
    const auto b = random_tensor({1, 1, 64, 64}, 20 + seed, 0.0, 1.0);
    const double loss = objective::ssim_loss(a, b).item();
    EXPECT_NEAR(loss, 1.0 - testing::direct_ssim(a.data(), b.data(), 64, 64), 1e-5);
    EXPECT_NEAR(objective::ssim_plane(a.data(), b.data(), 64, 64),
                testing::direct_ssim(a.data(), b.data(), 64, 64), 1e-9);
  }
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
  // Constant planes have zero variance, so SSIM reduces to the luminance term.
  const double mu_a = 0.3, mu_b = 0.5;
  const std::vector<float> a(20 * 20, float(mu_a)), b(20 * 20, float(mu_b));
  const double expected =
      (2 * mu_a * mu_b + objective::kSsimC1) / (mu_a * mu_a + mu_b * mu_b + objective::kSsimC1);
  EXPECT_NEAR(objective::ssim_plane(a, b, 20, 20), expected, 1e-6);
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
  auto a = random_tensor<double>({1, 1, 12, 13}, 30, 0.0, 1.0);
  const auto b = random_tensor<double>({1, 1, 12, 13}, 31, 0.0, 1.0);
  a.set_requires_grad(true);
  objective::ssim_loss(a, b).backward();
  const std::vector<double> grad(a.grad().begin(), a.grad().end());
  diff::NoGradGuard guard;
  std::vector<double> values(a.data().begin(), a.data().end());
  const auto numeric = testing::central_differences(
      values,
      [&] {
        std::copy(values.begin(), values.end(), a.mutable_data().begin());
        return objective::ssim_loss(a, b).item();
      },
      1e-6);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(numeric[i]) < 1e-9) continue;
    EXPECT_LT(testing::relative_error(grad[i], numeric[i]), 1e-2);
  }
}

TEST(Ssim, RejectsSmallPlanes) {
  const auto a = random_tensor({1, 1, 10, 16}, 1, 0.0, 1.0);
  EXPECT_THROW(objective::ssim_loss(a, a), ShapeError);
}

TEST(ComponentLosses, PerfectPredictionAndBatchMean) {
  const auto y = random_tensor({1, 1, 16, 16}, 5, 0.0, 1.0);
  EXPECT_NEAR(objective::loss_y(y, y).value.item(), 0.0, 1e-6);
  const auto uv = random_tensor({1, 2, 16, 16}, 6, -0.5, 0.5);
  EXPECT_NEAR(objective::loss_uv(uv, uv).value.item(), 0.0, 1e-6);

  const auto p = random_tensor({1, 1, 16, 16}, 7, 0.0, 1.0);
  const auto one = objective::loss_y(p, y).value.item();
  const auto two = objective::loss_y(diff::repeat_item(p, 0, 2), diff::repeat_item(y, 0, 2));
  EXPECT_NEAR(two.value.item(), one, 1e-6);
}

TEST(ComponentLosses, SumOfSeparateTerms) {
  const auto p = random_tensor({2, 1, 16, 16}, 8, 0.0, 1.0);
  const auto t = random_tensor({2, 1, 16, 16}, 9, 0.0, 1.0);
  const auto l = objective::loss_y(p, t);
  const double mse = objective::mse_loss(p, t).item();
  const double ssim = objective::ssim_loss(p, t).item();
  EXPECT_NEAR(l.value.item(), mse + ssim, 1e-6);
  EXPECT_NEAR(l.mse, mse, 1e-6);
  EXPECT_NEAR(l.ssim, ssim, 1e-6);
  EXPECT_NEAR(objective::loss_y(p, t, LossMode::mse).value.item(), mse, 1e-7);
  EXPECT_NEAR(objective::loss_y(p, t, LossMode::ssim).value.item(), ssim, 1e-7);

  const auto pu = random_tensor({2, 2, 16, 16}, 10, -0.5, 0.5);
  const auto tu = random_tensor({2, 2, 16, 16}, 11, -0.5, 0.5);
  const double shifted = objective::ssim_loss(diff::add_scalar(pu, 0.5f), diff::add_scalar(tu, 0.5f)).item();
  EXPECT_NEAR(objective::loss_uv(pu, tu).value.item(), objective::mse_loss(pu, tu).item() + shifted, 1e-6);
}

TEST(TotalLoss, WeightsTheChromaTerm) {
  objective::ComponentLoss<float> y{Tensor<float>({1, 1, 1, 1}, 1.0f), 0.4, 0.6};
  objective::ComponentLoss<float> uv{Tensor<float>({1, 1, 1, 1}, 0.5f), 0.2, 0.3};
  const auto [l, r] = objective::total_loss(y, uv, {0.6});
  EXPECT_NEAR(l.item(), 1.3, 1e-6);
  EXPECT_NEAR(r.l_total, 1.3, 1e-6);
  EXPECT_EQ(r.l_y, 1.0);
  EXPECT_EQ(r.l_uv, 0.5);
  EXPECT_EQ(r.alpha, 0.6);
  EXPECT_EQ(objective::LossWeights{}.alpha, 0.6);
  const auto [l0, r0] = objective::total_loss(y, uv, {0.0});
  EXPECT_EQ(l0.item(), 1.0f);
  EXPECT_THROW(objective::LossWeights{-0.1}.validate(), ConfigError);
}

TEST(LossModes, ParseAndPrint) {
  for (auto m : {LossMode::mse, LossMode::ssim, LossMode::mse_ssim}) {
    EXPECT_EQ(objective::parse_loss_mode(objective::to_string(m)), m);
  }
  EXPECT_EQ(objective::parse_loss_mode("mse+ssim"), LossMode::mse_ssim);
  EXPECT_THROW(objective::parse_loss_mode("l1"), ConfigError);
}

TEST(Psnr, CapUniformOffsetAndOracle) {
  const auto a = testing::random_rgb(12, 12, 1);
  EXPECT_EQ(objective::psnr(a, a), 100.0);
  EXPECT_NEAR(objective::psnr(color::RgbImage(8, 8, 0.2f), color::RgbImage(8, 8, 0.3f)), 20.0, 1e-5);
  const auto b = testing::random_rgb(12, 12, 2);
  EXPECT_NEAR(objective::psnr(a, b), testing::direct_psnr(a, b), 1e-6);
}

TEST(SsimMetric, IdentityAndLossConsistency) {
  const auto a = testing::random_rgb(32, 32, 3);
  const auto b = testing::random_rgb(32, 32, 4);
  EXPECT_NEAR(objective::ssim_metric(a, a), 1.0, 1e-6);
  const double loss = objective::ssim_loss(color::to_tensor(a), color::to_tensor(b)).item();
  EXPECT_NEAR(objective::ssim_metric(a, b), 1.0 - loss, 1e-6);
  const auto r = objective::evaluate(b, a);
  EXPECT_EQ(r.psnr, objective::psnr(b, a));
  EXPECT_EQ(r.ssim, objective::ssim_metric(b, a));
}

}  // namespace
}  // namespace a2net
