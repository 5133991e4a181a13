#include "a2net/data/dataset.hpp"

#include <algorithm>
#include <set>

#include "a2net/data/png_codec.hpp"
#include "a2net/errors.hpp"
#include "a2net/rng.hpp"

namespace a2net::data {

namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) {
      return static_cast<char>(std::tolower(ch));
    });
    if (ext != ".png") continue;
    out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

}  // namespace

PairedDataset load_pairs(const fs::path& root, const std::string& split) {
  const fs::path base = split.empty() ? root : root / split;
  if (!fs::is_directory(base)) throw DataError("missing directory " + base.string());
  const auto rain = list_pngs(base / "rain");
  const auto clean = list_pngs(base / "clean");

  PairedDataset ds{root, split, {}};
  for (const auto& [stem, path] : rain) {
    const auto it = clean.find(stem);
    if (it == clean.end()) {
      throw DataError("unmatched stem '" + stem + "': " + path.string() + " has no clean pair");
    }
    const Extent a = read_extent(path);
    const Extent b = read_extent(it->second);
    if (a.height != b.height || a.width != b.width) {
      throw DataError("extent mismatch for '" + stem + "': " + path.string() + " is " +
                      std::to_string(a.height) + "x" + std::to_string(a.width) + ", " +
                      it->second.string() + " is " + std::to_string(b.height) + "x" +
                      std::to_string(b.width));
    }
    ds.pairs.push_back({stem, path, it->second});
  }
  for (const auto& [stem, path] : clean) {
    if (!rain.contains(stem)) {
      throw DataError("unmatched stem '" + stem + "': " + path.string() + " has no rain pair");
    }
  }
  return ds;
}

std::vector<std::pair<color::RgbImage, color::RgbImage>> load_images(const PairedDataset& ds) {
  std::vector<std::pair<color::RgbImage, color::RgbImage>> out;
  out.reserve(ds.size());
  for (const auto& p : ds.pairs) out.emplace_back(decode_image(p.degraded), decode_image(p.clean));
  return out;
}

void PatchSpec::validate() const {
  if (size < 16 || size % 8 != 0) {
    throw ConfigError("patch_size must be >= 16 and divisible by 8, got " + std::to_string(size));
  }
  if (count < 1) throw ConfigError("patch_count must be >= 1");
}

color::RgbImage crop(const color::RgbImage& img, std::size_t top, std::size_t left,
                     std::size_t height, std::size_t width) {
  if (top + height > img.height() || left + width > img.width()) {
    throw DataError("crop window exceeds the image");
  }
  color::RgbImage out(height, width);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      const float* src = img.plane(c).data() + (top + y) * img.width() + left;
      std::copy(src, src + width, out.plane(c).data() + y * width);
    }
  }
  return out;
}

PatchSampler::PatchSampler(const PairedDataset& dataset, const PatchSpec& spec)
    : dataset_(dataset), spec_(spec) {
  spec_.validate();
  if (dataset_.empty()) throw DataError("cannot sample patches from an empty dataset");

  std::vector<Extent> extents;
  extents.reserve(dataset_.size());
  for (const auto& p : dataset_.pairs) {
    const Extent e = read_extent(p.degraded);
    if (e.height < spec_.size || e.width < spec_.size) {
      throw DataError("image " + p.degraded.string() + " (" + std::to_string(e.height) + "x" +
                      std::to_string(e.width) + ") is smaller than the " +
                      std::to_string(spec_.size) + " pixel patch");
    }
    extents.push_back(e);
  }

  Rng rng(spec_.seed);
  draws_.reserve(spec_.count);
  for (std::size_t i = 0; i < spec_.count; ++i) {
    PatchDraw d;
    d.pair = rng.below(dataset_.size());
    d.top = rng.below(extents[d.pair].height - spec_.size + 1);
    d.left = rng.below(extents[d.pair].width - spec_.size + 1);
    draws_.push_back(d);
  }
}

const std::pair<color::RgbImage, color::RgbImage>& PatchSampler::images(std::size_t pair) {
  auto it = cache_.find(pair);
  if (it == cache_.end()) {
    const auto& p = dataset_.pairs[pair];
    it = cache_.emplace(pair, std::pair{decode_image(p.degraded), decode_image(p.clean)}).first;
  }
  return it->second;
}

PatchPair PatchSampler::patch(std::size_t index) {
  const PatchDraw& d = draws_.at(index);
  const auto& [degraded, clean] = images(d.pair);
  return {crop(degraded, d.top, d.left, spec_.size, spec_.size),
          crop(clean, d.top, d.left, spec_.size, spec_.size)};
}

std::vector<PatchPair> sample_patches(const PairedDataset& dataset, const PatchSpec& spec) {
  PatchSampler sampler(dataset, spec);
  std::vector<PatchPair> out;
  out.reserve(sampler.size());
  for (std::size_t i = 0; i < sampler.size(); ++i) out.push_back(sampler.patch(i));
  return out;
}

}  // namespace a2net::data
