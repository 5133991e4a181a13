#include "a2net/cli/run_config.hpp"

#include <array>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "a2net/errors.hpp"
#include "json.hpp"

namespace a2net::cli {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 14> kKeys{
    "variant", "levels",     "k_encoder",  "k_y",          "k_uv",
    "alpha",   "loss_mode",  "base_lr",    "epochs_constant", "epochs_decay",
    "batch_size", "seed",    "patch_size", "patch_count"};

const json& field(const json& doc, std::string_view key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ConfigError("config: missing key \"" + std::string(key) + "\"");
  return *it;
}

std::uint64_t unsigned_field(const json& doc, std::string_view key, std::uint64_t max) {
  const json& v = field(doc, key);
  if (!v.is_number_unsigned()) {
    throw ConfigError("config: \"" + std::string(key) + "\" must be a non-negative integer");
  }
  const auto value = v.get<std::uint64_t>();
  if (value > max) {
    throw ConfigError("config: \"" + std::string(key) + "\" exceeds " + std::to_string(max));
  }
  return value;
}

double number_field(const json& doc, std::string_view key) {
  const json& v = field(doc, key);
  if (!v.is_number()) throw ConfigError("config: \"" + std::string(key) + "\" must be a number");
  return v.get<double>();
}

std::string string_field(const json& doc, std::string_view key) {
  const json& v = field(doc, key);
  if (!v.is_string()) throw ConfigError("config: \"" + std::string(key) + "\" must be a string");
  return v.get<std::string>();
}

template <typename Fn>
auto named(std::string_view key, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("config: \"" + std::string(key) + "\": " + e.what());
  }
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (auto k : kKeys) known = known || k == key;
    if (!known) throw ConfigError("config: unknown key \"" + key + "\"");
  }

  constexpr auto kSize = std::numeric_limits<std::size_t>::max();
  RunConfig cfg;
  auto& net = cfg.network;
  auto& tr = cfg.training;
  net.variant = named("variant", [&] { return net::parse_variant(string_field(doc, "variant")); });
  net.levels = unsigned_field(doc, "levels", 16);
  net.k_encoder = unsigned_field(doc, "k_encoder", 4096);
  net.k_y = unsigned_field(doc, "k_y", 4096);
  net.k_uv = unsigned_field(doc, "k_uv", 4096);
  tr.alpha = number_field(doc, "alpha");
  tr.loss_mode = named("loss_mode",
                       [&] { return objective::parse_loss_mode(string_field(doc, "loss_mode")); });
  tr.base_lr = number_field(doc, "base_lr");
  tr.epochs_constant = unsigned_field(doc, "epochs_constant", kSize);
  tr.epochs_decay = unsigned_field(doc, "epochs_decay", kSize);
  tr.batch_size = unsigned_field(doc, "batch_size", kSize);
  const auto seed = unsigned_field(doc, "seed", std::numeric_limits<std::uint32_t>::max());
  net.seed = static_cast<std::uint32_t>(seed);
  tr.seed = seed;
  cfg.patches.size = unsigned_field(doc, "patch_size", kSize);
  cfg.patches.count = unsigned_field(doc, "patch_count", kSize);
  cfg.patches.seed = seed;

  net.validate();
  tr.validate();
  cfg.patches.validate();
  if (cfg.patches.size % (std::size_t{1} << net.levels) != 0) {
    throw ConfigError("config: \"patch_size\" must be a multiple of 2^levels");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string to_json(const RunConfig& cfg) {
  json doc;
  doc["variant"] = std::string(net::to_string(cfg.network.variant));
  doc["levels"] = cfg.network.levels;
  doc["k_encoder"] = cfg.network.k_encoder;
  doc["k_y"] = cfg.network.k_y;
  doc["k_uv"] = cfg.network.k_uv;
  doc["alpha"] = cfg.training.alpha;
  doc["loss_mode"] = std::string(objective::to_string(cfg.training.loss_mode));
  doc["base_lr"] = cfg.training.base_lr;
  doc["epochs_constant"] = cfg.training.epochs_constant;
  doc["epochs_decay"] = cfg.training.epochs_decay;
  doc["batch_size"] = cfg.training.batch_size;
  doc["seed"] = cfg.training.seed;
  doc["patch_size"] = cfg.patches.size;
  doc["patch_count"] = cfg.patches.count;
  return doc.dump(2);
}

}  // namespace a2net::cli
