#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "a2net/colorspace/colorspace.hpp"
#include "a2net/data/dataset.hpp"
#include "a2net/data/synth.hpp"
#include "a2net/diffcore/tensor.hpp"

namespace a2net::testing {

template <typename T = float>
diff::Tensor<T> random_tensor(diff::Shape shape, std::uint64_t seed, double lo = -1.0,
                              double hi = 1.0);

color::RgbImage random_rgb(std::size_t height, std::size_t width, std::uint64_t seed);

/// YUV tensor of a random RGB image batch, so every value is a valid color.
diff::Tensor<float> random_yuv_tensor(std::size_t n, std::size_t height, std::size_t width,
                                      std::uint64_t seed);

/// `count` (degraded, clean) pairs from smooth clean images and the default
/// degrader, each with its own seed.
std::vector<data::PatchPair> synth_pairs(std::size_t count, std::size_t height, std::size_t width,
                                         std::uint64_t seed,
                                         const data::SynthParams& params = {});

/// Owning copy of the elements of a tensor or image, safe to iterate when
/// `x` is a temporary.
template <typename X>
auto values(const X& x) {
  using V = std::remove_cvref_t<decltype(x.data()[0])>;
  return std::vector<V>(x.data().begin(), x.data().end());
}

/// Self-deleting scratch directory under the system temp path.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Writes pairs as `<root>/rain/<stem>.png` and `<root>/clean/<stem>.png`.
void write_pairs(const std::filesystem::path& root, const std::vector<data::PatchPair>& pairs);

}  // namespace a2net::testing
