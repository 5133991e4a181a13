#include "a2net/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "a2net/errors.hpp"

namespace a2net::training {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

struct Entry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint32_t> words;  // raw 32-bit values
};

std::vector<std::uint32_t> dims_of(const diff::Shape& s) {
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

std::vector<std::uint32_t> words_of(std::span<const float> values) {
  std::vector<std::uint32_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::bit_cast<std::uint32_t>(values[i]);
  return out;
}

Entry scalar(std::string name, std::uint32_t value) { return {std::move(name), {1}, {value}}; }

std::vector<Entry> collect(const net::Model<float>& model, const TrainState* state) {
  const net::NetworkConfig& cfg = model.config();
  std::uint32_t variant = 0;
  for (std::uint32_t i = 0; i < std::size(net::kAllVariants); ++i) {
    if (net::kAllVariants[i] == cfg.variant) variant = i;
  }
  std::vector<Entry> out;
  out.push_back(scalar("meta.variant", variant));
  out.push_back(scalar("meta.levels", static_cast<std::uint32_t>(cfg.levels)));
  out.push_back(scalar("meta.k_encoder", static_cast<std::uint32_t>(cfg.k_encoder)));
  out.push_back(scalar("meta.k_y", static_cast<std::uint32_t>(cfg.k_y)));
  out.push_back(scalar("meta.k_uv", static_cast<std::uint32_t>(cfg.k_uv)));
  out.push_back(scalar("meta.seed", cfg.seed));
  for (const auto& p : model.parameters()) {
    out.push_back({p.name, dims_of(p.tensor.shape()), words_of(p.tensor.data())});
  }
  if (state != nullptr) {
    const auto params = model.parameters();
    const auto& m = state->adam.first_moments();
    const auto& v = state->adam.second_moments();
    if (m.size() != params.size() || v.size() != params.size()) {
      throw CheckpointError("optimizer state does not match the model's parameters");
    }
    out.push_back({"meta.step",
                   {2},
                   {static_cast<std::uint32_t>(state->step),
                    static_cast<std::uint32_t>(state->step >> 32)}});
    out.push_back({"meta.adam_step",
                   {2},
                   {static_cast<std::uint32_t>(state->adam.steps()),
                    static_cast<std::uint32_t>(state->adam.steps() >> 32)}});
    for (std::size_t k = 0; k < params.size(); ++k) {
      out.push_back({"adam.m." + params[k].name, dims_of(params[k].tensor.shape()), words_of(m[k])});
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      out.push_back({"adam.v." + params[k].name, dims_of(params[k].tensor.shape()), words_of(v[k])});
    }
  }
  return out;
}

void put(std::vector<char>& buf, std::uint32_t x) {
  char bytes[4];
  std::memcpy(bytes, &x, 4);
  buf.insert(buf.end(), bytes, bytes + 4);
}

class Reader {
 public:
  Reader(const std::vector<char>& buf, const std::filesystem::path& path)
      : buf_(buf), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t x;
    std::memcpy(&x, buf_.data() + pos_, 4);
    pos_ += 4;
    return x;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void words(std::vector<std::uint32_t>& out, std::size_t n) {
    need(4 * n);
    out.resize(n);
    std::memcpy(out.data(), buf_.data() + pos_, 4 * n);
    pos_ += 4 * n;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) {
      throw CheckpointError("truncated checkpoint " + path_.string() + " at byte " +
                            std::to_string(pos_));
    }
  }

  const std::vector<char>& buf_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t checkpoint_size(const net::Model<float>& model, const TrainState* state) {
  std::size_t total = 12;
  for (const Entry& e : collect(model, state)) {
    total += 4 + e.name.size() + 4 + 4 * e.dims.size() + 4 * e.words.size();
  }
  return total;
}

void save_checkpoint(const net::Model<float>& model, const std::filesystem::path& path,
                     const TrainState* state) {
  const std::vector<Entry> entries = collect(model, state);
  std::vector<char> buf(kCheckpointMagic, kCheckpointMagic + 4);
  put(buf, kCheckpointVersion);
  put(buf, static_cast<std::uint32_t>(entries.size()));
  for (const Entry& e : entries) {
    put(buf, static_cast<std::uint32_t>(e.name.size()));
    buf.insert(buf.end(), e.name.begin(), e.name.end());
    put(buf, static_cast<std::uint32_t>(e.dims.size()));
    for (std::uint32_t d : e.dims) put(buf, d);
    const auto* raw = reinterpret_cast<const char*>(e.words.data());
    buf.insert(buf.end(), raw, raw + 4 * e.words.size());
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf, path);

  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("bad magic in " + path.string() + ": not an A2CK checkpoint");
  }
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " +
                          path.string());
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.bytes(r.u32());
    const std::uint32_t ndims = r.u32();
    if (ndims > 8) throw CheckpointError("entry '" + e.name + "' has " + std::to_string(ndims) + " dims");
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndims; ++d) {
      e.dims.push_back(r.u32());
      numel *= e.dims.back();
    }
    r.words(e.words, numel);
    const std::string name = e.name;
    if (!entries.emplace(name, std::move(e)).second) {
      throw CheckpointError("duplicate entry '" + name + "' in " + path.string());
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes after the last entry in " + path.string());

  const auto take = [&](const std::string& name) -> Entry {
    const auto it = entries.find(name);
    if (it == entries.end()) {
      throw CheckpointError("checkpoint " + path.string() + " lacks entry '" + name + "'");
    }
    Entry e = std::move(it->second);
    entries.erase(it);
    return e;
  };
  const auto meta = [&](const std::string& name) -> std::uint32_t {
    const Entry e = take(name);
    if (e.words.size() != 1) throw CheckpointError("entry '" + name + "' must hold one value");
    return e.words[0];
  };
  const auto meta64 = [&](const std::string& name) -> std::uint64_t {
    const Entry e = take(name);
    if (e.words.size() != 2) throw CheckpointError("entry '" + name + "' must hold two values");
    return e.words[0] | (static_cast<std::uint64_t>(e.words[1]) << 32);
  };

  net::NetworkConfig cfg;
  const std::uint32_t variant = meta("meta.variant");
  if (variant >= std::size(net::kAllVariants)) {
    throw CheckpointError("unknown variant code " + std::to_string(variant));
  }
  cfg.variant = net::kAllVariants[variant];
  cfg.levels = meta("meta.levels");
  cfg.k_encoder = meta("meta.k_encoder");
  cfg.k_y = meta("meta.k_y");
  cfg.k_uv = meta("meta.k_uv");
  cfg.seed = meta("meta.seed");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid network config in checkpoint: ") + e.what());
  }

  Checkpoint ck{net::Model<float>(cfg), std::nullopt};
  auto params = ck.model.parameters();
  const auto fill = [&](const std::string& name, const diff::Shape& shape, std::span<float> dst) {
    const Entry e = take(name);
    if (e.dims != dims_of(shape)) {
      throw CheckpointError("shape mismatch for '" + name + "': model expects " + shape.str());
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::bit_cast<float>(e.words[i]);
  };
  for (auto& p : params) fill(p.name, p.tensor.shape(), p.tensor.mutable_data());

  if (entries.contains("meta.step")) {
    TrainState state;
    state.step = meta64("meta.step");
    state.adam = Adam(params, AdamHyper{});
    state.adam.set_steps(meta64("meta.adam_step"));
    for (std::size_t k = 0; k < params.size(); ++k) {
      fill("adam.m." + params[k].name, params[k].tensor.shape(), state.adam.first_moments()[k]);
      fill("adam.v." + params[k].name, params[k].tensor.shape(), state.adam.second_moments()[k]);
    }
    ck.state = std::move(state);
  }
  if (!entries.empty()) {
    throw CheckpointError("unknown entry '" + entries.begin()->first + "' in " + path.string());
  }
  return ck;
}

}  // namespace a2net::training
