#pragma once

#include <cstddef>
#include <filesystem>

#include "a2net/colorspace/colorspace.hpp"

namespace a2net::data {

/// Reads an 8-bit PNG (gray, RGB, palette; alpha is composited onto black)
/// and scales it into [0, 1]. Throws DataError naming the file when it is
/// unreadable or has 16-bit samples.
color::RgbImage decode_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG; values are clamped to [0, 1] and rounded half
/// away from zero.
void encode_image(const color::RgbImage& img, const std::filesystem::path& path);

struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Height and width from the PNG header without decoding pixels.
Extent read_extent(const std::filesystem::path& path);

/// Value of `v` after an encode/decode round trip.
float quantize(float v);
color::RgbImage quantize(const color::RgbImage& img);

}  // namespace a2net::data
