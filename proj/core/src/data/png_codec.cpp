#include "a2net/data/png_codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "a2net/errors.hpp"

namespace a2net::data {

namespace {

struct ImageGuard {
  png_image* image;
  ~ImageGuard() { png_image_free(image); }
};

std::uint8_t to_byte(float v) {
  const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

png_image open_header(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    const std::string reason = image.message;
    png_image_free(&image);
    throw DataError("cannot read image " + path.string() + ": " + reason);
  }
  return image;
}

}  // namespace

color::RgbImage decode_image(const std::filesystem::path& path) {
  png_image image = open_header(path);
  ImageGuard guard{&image};
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    throw DataError("unsupported bit depth in " + path.string() + ": only 8-bit PNG is accepted");
  }
  image.format = PNG_FORMAT_RGB;
  const std::size_t h = image.height, w = image.width;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  const png_color black{0, 0, 0};
  if (!png_image_finish_read(&image, &black, buffer.data(), 0, nullptr)) {
    throw DataError("cannot decode image " + path.string() + ": " + image.message);
  }

  color::RgbImage out(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    auto plane = out.plane(c);
    for (std::size_t i = 0; i < h * w; ++i) {
      plane[i] = static_cast<float>(buffer[3 * i + c] / 255.0);
    }
  }
  return out;
}

void encode_image(const color::RgbImage& img, const std::filesystem::path& path) {
  const std::size_t n = img.pixels();
  std::vector<std::uint8_t> buffer(3 * n);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto plane = img.plane(c);
    for (std::size_t i = 0; i < n; ++i) buffer[3 * i + c] = to_byte(plane[i]);
  }

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    const std::string reason = image.message;
    png_image_free(&image);
    throw DataError("cannot write image " + path.string() + ": " + reason);
  }
}

Extent read_extent(const std::filesystem::path& path) {
  png_image image = open_header(path);
  ImageGuard guard{&image};
  return {image.height, image.width};
}

float quantize(float v) { return static_cast<float>(to_byte(v) / 255.0); }

color::RgbImage quantize(const color::RgbImage& img) {
  color::RgbImage out = img;
  for (float& v : out.data()) v = quantize(v);
  return out;
}

}  // namespace a2net::data
