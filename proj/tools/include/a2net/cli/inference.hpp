#pragma once

#include <cstddef>

#include "a2net/colorspace/colorspace.hpp"
#include "a2net/net/model.hpp"

namespace a2net::cli {

/// Pads bottom and right by mirror reflection (edge pixel not repeated)
/// so both extents become multiples of `multiple`.
color::RgbImage reflect_pad(const color::RgbImage& img, std::size_t multiple);

/// RGB in, RGB out: converts to the model's space, pads, runs the network,
/// crops back and converts to RGB.
color::RgbImage restore(const net::Model<float>& model, const color::RgbImage& img);

}  // namespace a2net::cli
