#pragma once

#include <cstddef>
#include <string_view>
#include <utility>

#include "a2net/colorspace/colorspace.hpp"
#include "a2net/diffcore/tensor.hpp"

namespace a2net::objective {

// Structural similarity constants: 11x11 Gaussian window, sigma 1.5,
// dynamic range 1.
inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kPsnrCap = 100.0;

enum class LossMode { mse, ssim, mse_ssim };

std::string_view to_string(LossMode mode);
/// Accepts "mse", "ssim" and "mse+ssim"; throws ConfigError otherwise.
LossMode parse_loss_mode(std::string_view name);

struct LossWeights {
  double alpha = 0.6;  // weight of the UV term
  void validate() const;
};

/// Loss terms of one batch. Terms disabled by the loss mode are reported
/// as zero, so l_y == mse_y + ssim_y and l_uv == mse_uv + ssim_uv always hold.
struct LossReport {
  double l_total = 0.0;
  double l_y = 0.0;
  double l_uv = 0.0;
  double mse_y = 0.0;
  double ssim_y = 0.0;
  double mse_uv = 0.0;
  double ssim_uv = 0.0;
  double alpha = 0.6;
};

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Mean squared difference over all elements.
template <typename T>
diff::Tensor<T> mse_loss(const diff::Tensor<T>& a, const diff::Tensor<T>& b);

/// 1 - mean SSIM over every valid window position of every (item, channel)
/// plane. Inputs are expected in [0, 1]; both extents must be >= 11.
template <typename T>
diff::Tensor<T> ssim_loss(const diff::Tensor<T>& a, const diff::Tensor<T>& b);

template <typename T>
struct ComponentLoss {
  diff::Tensor<T> value;
  double mse = 0.0;
  double ssim = 0.0;
};

/// MSE + SSIM loss of a luminance prediction; the batch mean is implied by
/// the element means.
template <typename T>
ComponentLoss<T> loss_y(const diff::Tensor<T>& predicted, const diff::Tensor<T>& truth,
                        LossMode mode = LossMode::mse_ssim);

/// As loss_y for chrominance in [-0.5, 0.5]; the SSIM term sees both
/// inputs shifted by +0.5.
template <typename T>
ComponentLoss<T> loss_uv(const diff::Tensor<T>& predicted, const diff::Tensor<T>& truth,
                         LossMode mode = LossMode::mse_ssim);

/// Whole-image MSE + SSIM loss over all three channels. For YUV tensors the
/// SSIM term sees chroma shifted by +0.5.
template <typename T>
ComponentLoss<T> loss_image(const diff::Tensor<T>& predicted, const diff::Tensor<T>& truth,
                            color::Space space, LossMode mode = LossMode::mse_ssim);

/// L = L_Y + alpha * L_UV, with the report filled from both components. An
/// undefined `uv.value` means a single whole-image term reported as L_Y.
template <typename T>
std::pair<diff::Tensor<T>, LossReport> total_loss(const ComponentLoss<T>& y,
                                                  const ComponentLoss<T>& uv,
                                                  const LossWeights& weights);

/// Mean SSIM of one plane (valid windows only), evaluated in double.
double ssim_plane(std::span<const float> a, std::span<const float> b, std::size_t height,
                  std::size_t width);

double psnr(const color::RgbImage& a, const color::RgbImage& b);
/// Mean over the three channels of ssim_plane.
double ssim_metric(const color::RgbImage& a, const color::RgbImage& b);
MetricReport evaluate(const color::RgbImage& restored, const color::RgbImage& truth);

}  // namespace a2net::objective
