#include "fixtures.hpp"

#include <atomic>
#include <cstdio>

#include <unistd.h>

#include "a2net/data/png_codec.hpp"
#include "a2net/rng.hpp"

namespace a2net::testing {

template <typename T>
diff::Tensor<T> random_tensor(diff::Shape shape, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  diff::Tensor<T> t(shape);
  for (T& v : t.mutable_data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template diff::Tensor<float> random_tensor(diff::Shape, std::uint64_t, double, double);
template diff::Tensor<double> random_tensor(diff::Shape, std::uint64_t, double, double);

color::RgbImage random_rgb(std::size_t height, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  color::RgbImage img(height, width);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

diff::Tensor<float> random_yuv_tensor(std::size_t n, std::size_t height, std::size_t width,
                                      std::uint64_t seed) {
  std::vector<color::YuvImage> images;
  for (std::size_t i = 0; i < n; ++i) {
    images.push_back(color::rgb_to_yuv(random_rgb(height, width, seed * 1000 + i)));
  }
  return color::to_tensor<color::YuvTag>(images);
}

std::vector<data::PatchPair> synth_pairs(std::size_t count, std::size_t height, std::size_t width,
                                         std::uint64_t seed, const data::SynthParams& params) {
  std::vector<data::PatchPair> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto clean = data::synth_clean(height, width, seed * 7919 + i);
    data::SynthParams p = params;
    p.seed = seed * 104729 + i;
    out.push_back({data::synth_degrade(clean, p), clean});
  }
  return out;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("a2net_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_pairs(const std::filesystem::path& root, const std::vector<data::PatchPair>& pairs) {
  std::filesystem::create_directories(root / "rain");
  std::filesystem::create_directories(root / "clean");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "img%03zu.png", i);
    data::encode_image(pairs[i].degraded, root / "rain" / stem);
    data::encode_image(pairs[i].clean, root / "clean" / stem);
  }
}

}  // namespace a2net::testing
