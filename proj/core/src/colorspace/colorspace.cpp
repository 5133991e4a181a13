#include "a2net/colorspace/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "a2net/errors.hpp"

namespace a2net::color {

template <typename Tag>
Image3<Tag>::Image3(std::size_t height, std::size_t width, std::vector<float> planar)
    : height_(height), width_(width), data_(std::move(planar)) {
  if (data_.size() != 3 * height * width) {
    throw ShapeError("image: " + std::to_string(data_.size()) + " values for " +
                     std::to_string(height) + "x" + std::to_string(width) + "x3");
  }
}

template class Image3<RgbTag>;
template class Image3<YuvTag>;
template class Image3<ResidualTag>;

namespace {

void check_range(std::span<const float> values, float lo, float hi, const char* what) {
  for (float v : values) {
    if (!(v >= lo && v <= hi)) {
      throw DataError(std::string(what) + " value " + std::to_string(v) + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
}

template <typename A, typename B>
void require_extents(const A& a, const B& b, const char* op) {
  if (!a.same_extents(b)) {
    throw ShapeError(std::string(op) + ": extent mismatch " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
  }
}

template <typename Tag>
Residual difference(const Image3<Tag>& truth, const Image3<Tag>& input, const char* op) {
  require_extents(truth, input, op);
  Residual out(truth.height(), truth.width());
  const auto t = truth.data();
  const auto i = input.data();
  auto o = out.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = t[k] - i[k];
  return out;
}

}  // namespace

void validate(const RgbImage& img) {
  check_range(img.data(), 0.0f, 1.0f, "RGB");
}

void validate(const YuvImage& img) {
  check_range(img.plane(0), 0.0f, 1.0f, "Y");
  check_range(img.plane(1), -0.5f, 0.5f, "U");
  check_range(img.plane(2), -0.5f, 0.5f, "V");
}

YuvImage rgb_to_yuv(const RgbImage& img) {
  YuvImage out(img.height(), img.width());
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto y = out.plane(0), u = out.plane(1), v = out.plane(2);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const double luma = kWeightR * r[p] + kWeightG * g[p] + kWeightB * b[p];
    y[p] = static_cast<float>(std::clamp(luma, 0.0, 1.0));
    u[p] = static_cast<float>(std::clamp(kScaleU * (b[p] - luma), -0.5, 0.5));
    v[p] = static_cast<float>(std::clamp(kScaleV * (r[p] - luma), -0.5, 0.5));
  }
  return out;
}

RgbImage yuv_to_rgb(const YuvImage& img) {
  RgbImage out(img.height(), img.width());
  const auto y = img.plane(0), u = img.plane(1), v = img.plane(2);
  auto r = out.plane(0), g = out.plane(1), b = out.plane(2);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const double red = y[p] + v[p] / kScaleV;
    const double blue = y[p] + u[p] / kScaleU;
    const double green = (y[p] - kWeightR * red - kWeightB * blue) / kWeightG;
    r[p] = static_cast<float>(std::clamp(red, 0.0, 1.0));
    g[p] = static_cast<float>(std::clamp(green, 0.0, 1.0));
    b[p] = static_cast<float>(std::clamp(blue, 0.0, 1.0));
  }
  return out;
}

Residual residual_rgb(const RgbImage& truth, const RgbImage& input) {
  return difference(truth, input, "residual_rgb");
}

Residual residual_yuv(const YuvImage& truth, const YuvImage& input) {
  return difference(truth, input, "residual_yuv");
}

RgbImage swap_channels(const RgbImage& degraded, const RgbImage& clean, SwapMode mode) {
  require_extents(degraded, clean, "swap_channels");
  const YuvImage d = rgb_to_yuv(degraded);
  const YuvImage c = rgb_to_yuv(clean);
  const YuvImage& y_source = mode == SwapMode::take_y_from_clean ? c : d;
  const YuvImage& uv_source = mode == SwapMode::take_y_from_clean ? d : c;
  YuvImage mixed = uv_source;
  std::ranges::copy(y_source.plane(0), mixed.plane(0).begin());
  return yuv_to_rgb(mixed);
}

ResidualHistogram residual_histogram(std::span<const std::pair<RgbImage, RgbImage>> pairs,
                                     Space space, std::size_t bins) {
  if (pairs.empty()) throw DataError("residual_histogram: no image pairs");
  if (bins < 2) throw ConfigError("residual_histogram: bins must be >= 2");

  ResidualHistogram hist;
  const auto& labels = space == Space::rgb ? RgbTag::labels : YuvTag::labels;
  for (std::size_t c = 0; c < 3; ++c) {
    hist.labels[c] = labels[c];
    hist.counts[c].assign(bins, 0);
  }
  hist.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    hist.edges[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(bins);
  }

  std::array<double, 3> sum{}, sum_sq{};
  std::size_t total = 0;
  for (const auto& [degraded, clean] : pairs) {
    const Residual e = space == Space::rgb
                           ? residual_rgb(clean, degraded)
                           : residual_yuv(rgb_to_yuv(clean), rgb_to_yuv(degraded));
    for (std::size_t c = 0; c < 3; ++c) {
      for (float v : e.plane(c)) {
        const double x = std::clamp(static_cast<double>(v), -1.0, 1.0);
        auto bin = static_cast<std::size_t>(std::floor((x + 1.0) * 0.5 * static_cast<double>(bins)));
        hist.counts[c][std::min(bin, bins - 1)] += 1;
        sum[c] += x;
        sum_sq[c] += x * x;
      }
    }
    total += e.pixels();
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const double n = static_cast<double>(total);
    hist.mean[c] = sum[c] / n;
    hist.stddev[c] = std::sqrt(std::max(0.0, sum_sq[c] / n - hist.mean[c] * hist.mean[c]));
  }
  return hist;
}

void write_histogram_csv(const ResidualHistogram& hist, std::ostream& out) {
  out << "channel,bin_left,bin_right,count\n";
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t b = 0; b < hist.bins(); ++b) {
      out << hist.labels[c] << ',' << hist.edges[b] << ',' << hist.edges[b + 1] << ','
          << hist.counts[c][b] << '\n';
    }
  }
}

void write_histogram_summary(const ResidualHistogram& hist, std::ostream& out) {
  out << "channel,mean,std\n";
  for (std::size_t c = 0; c < 3; ++c) {
    out << hist.labels[c] << ',' << hist.mean[c] << ',' << hist.stddev[c] << '\n';
  }
}

template <typename Tag>
diff::Tensor<float> to_tensor(std::span<const Image3<Tag>> images) {
  if (images.empty()) throw ShapeError("to_tensor: no images");
  const std::size_t h = images[0].height(), w = images[0].width();
  std::vector<float> values;
  values.reserve(images.size() * 3 * h * w);
  for (const auto& img : images) {
    if (img.height() != h || img.width() != w) {
      throw ShapeError("to_tensor: images of differing extents in one batch");
    }
    values.insert(values.end(), img.data().begin(), img.data().end());
  }
  return diff::Tensor<float>(diff::Shape{images.size(), 3, h, w}, std::move(values));
}

template <typename Tag>
Image3<Tag> from_tensor(const diff::Tensor<float>& t, std::size_t index) {
  const auto& s = t.shape();
  if (s.c != 3 || index >= s.n) {
    throw ShapeError("from_tensor: need item " + std::to_string(index) +
                     " of a 3-channel tensor, got " + s.str());
  }
  const auto begin = t.data().begin() + static_cast<std::ptrdiff_t>(index * s.item());
  return Image3<Tag>(s.h, s.w, std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(s.item())));
}

template diff::Tensor<float> to_tensor(std::span<const RgbImage>);
template diff::Tensor<float> to_tensor(std::span<const YuvImage>);
template RgbImage from_tensor(const diff::Tensor<float>&, std::size_t);
template YuvImage from_tensor(const diff::Tensor<float>&, std::size_t);

}  // namespace a2net::color
