#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "a2net/net/model.hpp"
#include "a2net/training/adam.hpp"

namespace a2net::training {

inline constexpr char kCheckpointMagic[4] = {'A', '2', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Optimizer progress stored next to the parameters so training can resume.
struct TrainState {
  std::uint64_t step = 0;  // completed optimizer steps
  Adam adam;
};

struct Checkpoint {
  net::Model<float> model;
  std::optional<TrainState> state;
};

/// Writes `A2CK`, the version, the entry count and then the entries:
/// network metadata (`meta.*`), the parameters in model order and, with a
/// state, the step counter and Adam moments (`adam.m.*`, `adam.v.*`).
void save_checkpoint(const net::Model<float>& model, const std::filesystem::path& path,
                     const TrainState* state = nullptr);

/// Throws CheckpointError on bad magic or version, truncation, unknown or
/// missing entries, and shape mismatches against the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Bytes save_checkpoint writes for `model` (and `state`, if given).
std::size_t checkpoint_size(const net::Model<float>& model, const TrainState* state = nullptr);

}  // namespace a2net::training
