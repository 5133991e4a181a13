#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "a2net/colorspace/colorspace.hpp"

namespace a2net::data {

struct ImagePair {
  std::string stem;
  std::filesystem::path degraded;
  std::filesystem::path clean;
};

/// Degraded images live in `<root>/<split>/rain`, their clean counterparts
/// in `<root>/<split>/clean` under the same file stem.
struct PairedDataset {
  std::filesystem::path root;
  std::string split;
  std::vector<ImagePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Lists `.png` pairs sorted by stem. An empty `split` reads `root` itself.
/// Throws DataError for a missing directory, a stem present on one side
/// only, or a pair whose extents differ.
PairedDataset load_pairs(const std::filesystem::path& root, const std::string& split = "");

/// Decoded (degraded, clean) images of every pair.
std::vector<std::pair<color::RgbImage, color::RgbImage>> load_images(const PairedDataset& ds);

struct PatchSpec {
  std::size_t size = 256;
  std::size_t count = 1;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless size >= 16, size % 8 == 0 and count >= 1.
  void validate() const;
};

struct PatchDraw {
  std::size_t pair = 0;
  std::size_t top = 0;
  std::size_t left = 0;
};

struct PatchPair {
  color::RgbImage degraded;
  color::RgbImage clean;
};

/// Copy of the height x width window of `img` whose corner is (top, left).
color::RgbImage crop(const color::RgbImage& img, std::size_t top, std::size_t left,
                     std::size_t height, std::size_t width);

/// Seeded patch positions over a dataset with a decode cache, so large
/// patch counts never hold more than one copy of each source image.
class PatchSampler {
 public:
  /// Draws every position up front. Throws DataError naming the file if an
  /// image is smaller than the patch or the dataset is empty.
  PatchSampler(const PairedDataset& dataset, const PatchSpec& spec);

  const std::vector<PatchDraw>& draws() const { return draws_; }
  std::size_t size() const { return draws_.size(); }
  PatchPair patch(std::size_t index);

 private:
  const std::pair<color::RgbImage, color::RgbImage>& images(std::size_t pair);

  PairedDataset dataset_;
  PatchSpec spec_;
  std::vector<PatchDraw> draws_;
  std::map<std::size_t, std::pair<color::RgbImage, color::RgbImage>> cache_;
};

/// Uniform crop positions; the same window is cut from both images of a pair.
std::vector<PatchPair> sample_patches(const PairedDataset& dataset, const PatchSpec& spec);

}  // namespace a2net::data
