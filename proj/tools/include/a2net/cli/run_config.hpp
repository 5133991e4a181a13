#pragma once

#include <filesystem>
#include <string>

#include "a2net/data/dataset.hpp"
#include "a2net/net/model.hpp"
#include "a2net/training/schedule.hpp"

namespace a2net::cli {

/// Everything a training run is configured with. Defaults are the
/// published settings.
struct RunConfig {
  net::NetworkConfig network;
  training::TrainingConfig training;
  data::PatchSpec patches{256, 18000, 0};
};

RunConfig default_run_config();

/// Parses a JSON object holding exactly the keys variant, levels,
/// k_encoder, k_y, k_uv, alpha, loss_mode, base_lr, epochs_constant,
/// epochs_decay, batch_size, seed, patch_size and patch_count. Missing,
/// unknown or mistyped keys throw ConfigError naming the key.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

std::string to_json(const RunConfig& cfg);

}  // namespace a2net::cli
