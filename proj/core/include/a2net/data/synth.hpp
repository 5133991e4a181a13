#pragma once

#include <cstddef>
#include <cstdint>

#include "a2net/colorspace/colorspace.hpp"

namespace a2net::data {

template <typename V>
struct Range {
  V lo;
  V hi;
};

/// Non-physical raindrop stand-in: Gaussian luminance bumps blended with a
/// blurred copy of Y, plus a small chroma leak of the same bump field.
struct SynthParams {
  Range<std::size_t> blobs{4, 10};
  Range<double> radius{3.0, 12.0};  // Gaussian sigma in pixels
  Range<double> gain{0.1, 0.3};     // magnitude; the sign is random per blob
  double blur_sigma = 2.0;
  double chroma_leak = 0.05;
  std::uint64_t seed = 0;

  /// Throws ConfigError on empty or negative ranges.
  void validate() const;
};

color::RgbImage synth_degrade(const color::RgbImage& clean, const SynthParams& params);

/// Smooth random test image: a few low-frequency color gradients plus
/// fine texture, used where no clean photos are available.
color::RgbImage synth_clean(std::size_t height, std::size_t width, std::uint64_t seed);

}  // namespace a2net::data
