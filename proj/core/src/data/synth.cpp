#include "a2net/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "a2net/errors.hpp"
#include "a2net/rng.hpp"

namespace a2net::data {

namespace {

// Indexes 0..n-1 reflected without repeating the edge sample.
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_blur(std::span<const float> src, std::size_t h, std::size_t w,
                                  double sigma) {
  std::vector<double> out(src.begin(), src.end());
  if (sigma <= 0.0) return out;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += taps[k + radius];
  }
  for (double& t : taps) t /= total;

  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  std::vector<double> tmp(h * w);
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * out[y * W + reflect(x + k, W)];
      }
      tmp[y * W + x] = acc;
    }
  }
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * tmp[reflect(y + k, H) * W + x];
      }
      out[y * W + x] = acc;
    }
  }
  return out;
}

}  // namespace

void SynthParams::validate() const {
  if (blobs.lo > blobs.hi) throw ConfigError("synth: blob count range is empty");
  if (radius.lo < 0.0 || radius.lo > radius.hi) {
    throw ConfigError("synth: blob radius range must be non-negative and non-empty");
  }
  if (gain.lo < 0.0 || gain.lo > gain.hi) {
    throw ConfigError("synth: luminance gain range must be non-negative and non-empty");
  }
  if (blur_sigma < 0.0) throw ConfigError("synth: blur radius must be non-negative");
  if (chroma_leak < 0.0) throw ConfigError("synth: chroma leak must be non-negative");
}

color::RgbImage synth_degrade(const color::RgbImage& clean, const SynthParams& params) {
  params.validate();
  color::validate(clean);
  Rng rng(params.seed);
  const auto count = static_cast<std::size_t>(rng.between(
      static_cast<std::int64_t>(params.blobs.lo), static_cast<std::int64_t>(params.blobs.hi)));
  if (count == 0) return clean;

  const std::size_t h = clean.height(), w = clean.width();
  std::vector<double> bump(h * w, 0.0), cover(h * w, 0.0);
  for (std::size_t b = 0; b < count; ++b) {
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double r = std::max(rng.uniform(params.radius.lo, params.radius.hi), 0.5);
    const double g = rng.uniform(params.gain.lo, params.gain.hi) * (rng.below(2) ? 1.0 : -1.0);
    const double reach = 3.0 * r;
    const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(cy - reach)));
    const auto y1 = static_cast<std::size_t>(std::min<double>(h, std::ceil(cy + reach)));
    const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(cx - reach)));
    const auto x1 = static_cast<std::size_t>(std::min<double>(w, std::ceil(cx + reach)));
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) {
        const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
        const double p = std::exp(-(dx * dx + dy * dy) / (2.0 * r * r));
        bump[y * w + x] += g * p;
        cover[y * w + x] += p;
      }
    }
  }

  color::YuvImage yuv = color::rgb_to_yuv(clean);
  const std::vector<double> blurred = gaussian_blur(yuv.plane(0), h, w, params.blur_sigma);
  auto Y = yuv.plane(0);
  auto U = yuv.plane(1);
  auto V = yuv.plane(2);
  using color::kScaleU, color::kScaleV, color::kWeightB, color::kWeightG, color::kWeightR;
  for (std::size_t i = 0; i < h * w; ++i) {
    const double mask = std::min(1.0, cover[i]);
    const double y = (1.0 - mask) * Y[i] + mask * blurred[i] + bump[i];
    double u = std::clamp(U[i] + params.chroma_leak * bump[i], -0.5, 0.5);
    double v = std::clamp(V[i] + params.chroma_leak * bump[i], -0.5, 0.5);

    // Luminance interval keeping R, G and B inside [0, 1] for this chroma.
    const auto bounds = [](double uu, double vv) {
      const double r = vv / kScaleV, b = uu / kScaleU;
      const double g = (kWeightR * r + kWeightB * b) / kWeightG;
      return std::pair{std::max({-r, -b, g}), std::min({1.0 - r, 1.0 - b, 1.0 + g})};
    };
    auto [lo, hi] = bounds(u, v);
    if (lo > hi) {
      u = U[i];
      v = V[i];
      std::tie(lo, hi) = bounds(u, v);
    }
    Y[i] = static_cast<float>(std::clamp(y, lo, hi));
    U[i] = static_cast<float>(u);
    V[i] = static_cast<float>(v);
  }
  return color::yuv_to_rgb(yuv);
}

color::RgbImage synth_clean(std::size_t height, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  color::RgbImage out(height, width);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = rng.uniform(0.3, 0.7);
    struct Wave {
      double amp, fy, fx, phase;
    };
    Wave waves[4];
    for (std::size_t k = 0; k < 4; ++k) {
      const double cycles = k < 2 ? rng.uniform(0.3, 1.5) : rng.uniform(3.0, 8.0);
      const double angle = rng.uniform(0.0, two_pi);
      waves[k] = {k < 2 ? rng.uniform(0.08, 0.12) : rng.uniform(0.02, 0.04),
                  cycles * std::sin(angle) / static_cast<double>(height),
                  cycles * std::cos(angle) / static_cast<double>(width),
                  rng.uniform(0.0, two_pi)};
    }
    auto plane = out.plane(c);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        double v = base;
        for (const Wave& wv : waves) {
          v += wv.amp * std::sin(two_pi * (wv.fy * y + wv.fx * x) + wv.phase);
        }
        plane[y * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace a2net::data
