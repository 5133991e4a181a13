#include "a2net/cli/inference.hpp"

#include "a2net/data/dataset.hpp"
#include "a2net/errors.hpp"

namespace a2net::cli {

namespace {

// Mirror index into [0, n) with period 2(n - 1), so pads longer than the
// image keep bouncing between its edges.
std::size_t mirror(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  const std::size_t r = i % period;
  return r < n ? r : period - r;
}

std::size_t round_up(std::size_t v, std::size_t multiple) {
  return (v + multiple - 1) / multiple * multiple;
}

}  // namespace

color::RgbImage reflect_pad(const color::RgbImage& img, std::size_t multiple) {
  if (multiple == 0) throw ConfigError("reflect_pad: multiple must be >= 1");
  if (img.pixels() == 0) throw DataError("reflect_pad: empty image");
  const std::size_t h = round_up(img.height(), multiple);
  const std::size_t w = round_up(img.width(), multiple);
  if (h == img.height() && w == img.width()) return img;
  color::RgbImage out(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t sy = mirror(y, img.height());
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, sy, mirror(x, img.width()));
    }
  }
  return out;
}

color::RgbImage restore(const net::Model<float>& model, const color::RgbImage& img) {
  const std::size_t multiple = std::size_t{1} << model.config().levels;
  const color::RgbImage padded = reflect_pad(img, multiple);
  const color::Space space = net::model_space(model.config().variant);

  diff::NoGradGuard no_grad;
  color::RgbImage full;
  if (space == color::Space::yuv) {
    const auto out = model.forward(color::to_tensor(color::rgb_to_yuv(padded)));
    full = color::yuv_to_rgb(color::from_tensor<color::YuvTag>(out));
  } else {
    full = color::from_tensor<color::RgbTag>(model.forward(color::to_tensor(padded)));
  }
  return data::crop(full, 0, 0, img.height(), img.width());
}

}  // namespace a2net::cli
