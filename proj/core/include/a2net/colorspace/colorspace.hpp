#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "a2net/diffcore/tensor.hpp"

namespace a2net::color {

struct RgbTag {
  static constexpr std::array<const char*, 3> labels{"R", "G", "B"};
};
struct YuvTag {
  static constexpr std::array<const char*, 3> labels{"Y", "U", "V"};
};
struct ResidualTag {
  static constexpr std::array<const char*, 3> labels{"0", "1", "2"};
};

/// Three planar 32-bit channels of height x width pixels.
template <typename Tag>
class Image3 {
 public:
  Image3() = default;
  Image3(std::size_t height, std::size_t width, float fill = 0.0f)
      : height_(height), width_(width), data_(3 * height * width, fill) {}
  Image3(std::size_t height, std::size_t width, std::vector<float> planar);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  bool same_extents(const auto& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  std::span<float> plane(std::size_t c) { return {data_.data() + c * pixels(), pixels()}; }
  std::span<const float> plane(std::size_t c) const {
    return {data_.data() + c * pixels(), pixels()};
  }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  friend bool operator==(const Image3&, const Image3&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

/// Values in [0, 1].
using RgbImage = Image3<RgbTag>;
/// Y in [0, 1]; U and V in [-0.5, 0.5]. Plane 0 is Y, planes 1-2 are UV.
using YuvImage = Image3<YuvTag>;
/// Per-channel differences, values in [-1, 1].
using Residual = Image3<ResidualTag>;

// BT.601 luma weights with chroma scaled into [-0.5, 0.5].
inline constexpr double kWeightR = 0.299;
inline constexpr double kWeightG = 0.587;
inline constexpr double kWeightB = 0.114;
inline constexpr double kScaleU = 0.564;
inline constexpr double kScaleV = 0.713;

/// Throws DataError if any value is outside [0, 1].
void validate(const RgbImage& img);
/// Throws DataError if Y is outside [0, 1] or U/V outside [-0.5, 0.5].
void validate(const YuvImage& img);

YuvImage rgb_to_yuv(const RgbImage& img);
/// Exact algebraic inverse of rgb_to_yuv followed by a clamp to [0, 1].
RgbImage yuv_to_rgb(const YuvImage& img);

/// truth - input, per channel.
Residual residual_rgb(const RgbImage& truth, const RgbImage& input);
Residual residual_yuv(const YuvImage& truth, const YuvImage& input);

enum class SwapMode {
  take_y_from_clean,   // Y of clean, UV of degraded
  take_uv_from_clean,  // Y of degraded, UV of clean
};

RgbImage swap_channels(const RgbImage& degraded, const RgbImage& clean, SwapMode mode);

enum class Space { rgb, yuv };

struct ResidualHistogram {
  std::array<std::string, 3> labels;
  std::vector<double> edges;  // bins + 1 values from -1 to 1
  std::array<std::vector<std::size_t>, 3> counts;
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};

  std::size_t bins() const { return edges.size() - 1; }
};

/// Histogram of clean - degraded residuals over uniform bins on [-1, 1].
/// Each pair is (degraded, clean).
ResidualHistogram residual_histogram(std::span<const std::pair<RgbImage, RgbImage>> pairs,
                                     Space space, std::size_t bins);

/// `channel,bin_left,bin_right,count` rows.
void write_histogram_csv(const ResidualHistogram& hist, std::ostream& out);
/// `channel,mean,std` rows.
void write_histogram_summary(const ResidualHistogram& hist, std::ostream& out);

/// Packs images into a [N, 3, H, W] tensor; all images must share extents.
template <typename Tag>
diff::Tensor<float> to_tensor(std::span<const Image3<Tag>> images);

template <typename Tag>
diff::Tensor<float> to_tensor(const Image3<Tag>& image) {
  return to_tensor<Tag>(std::span<const Image3<Tag>>(&image, 1));
}

/// Item `index` of a 3-channel tensor, values copied verbatim.
template <typename Tag>
Image3<Tag> from_tensor(const diff::Tensor<float>& t, std::size_t index = 0);

}  // namespace a2net::color
