#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "a2net/data/dataset.hpp"
#include "a2net/net/model.hpp"
#include "a2net/objective/objective.hpp"
#include "a2net/training/checkpoint.hpp"
#include "a2net/training/schedule.hpp"

namespace a2net::training {

/// (degraded, clean) tensors in the model's color space.
struct Batch {
  diff::Tensor<float> degraded;
  diff::Tensor<float> clean;
};

Batch make_batch(std::span<const data::PatchPair> patches, color::Space space);

/// Loss of a network output in the variant's native space: Y and UV terms
/// for split-decoder variants, one whole-image term otherwise.
template <typename T>
std::pair<diff::Tensor<T>, objective::LossReport> output_loss(net::Variant variant,
                                                              const diff::Tensor<T>& predicted,
                                                              const diff::Tensor<T>& clean,
                                                              const TrainingConfig& cfg);

/// Loss of `model` on `batch` in the model's native space: Y and UV terms
/// for split-decoder variants, one whole-image term otherwise.
std::pair<diff::Tensor<float>, objective::LossReport> compute_loss(
    const net::Model<float>& model, const Batch& batch, const TrainingConfig& cfg);

/// Forward, backward and one Adam update at `lr`. Gradients are cleared
/// afterwards; the returned report is the pre-update loss.
objective::LossReport train_step(net::Model<float>& model, Adam& adam, const Batch& batch,
                                 const TrainingConfig& cfg, double lr);

/// Training samples addressed by index.
struct SampleSet {
  std::size_t size = 0;
  std::function<data::PatchPair(std::size_t)> get;

  static SampleSet of(std::vector<data::PatchPair> patches);
  static SampleSet of(data::PatchSampler& sampler);
};

struct LogRow {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  objective::LossReport loss;
  double lr = 0.0;
};

struct TrainOptions {
  /// Directory receiving model.a2ck and loss.csv; empty keeps everything in memory.
  std::filesystem::path out_dir;
  /// Stop once this many optimizer steps have completed in total (0: run the schedule).
  std::uint64_t max_steps = 0;
  /// Called after every step; returning false stops training.
  std::function<bool(std::uint64_t step, const objective::LossReport&)> on_step;
  /// One CSV row per step instead of one per epoch.
  bool log_every_step = false;
};

struct TrainResult {
  net::Model<float> model;
  TrainState state;
  std::vector<LogRow> log;
};

inline constexpr const char* kCheckpointFile = "model.a2ck";
inline constexpr const char* kLossLogFile = "loss.csv";

std::size_t steps_per_epoch(std::size_t samples, std::size_t batch_size);

/// Sample order of epoch `epoch`: a seeded permutation of [0, samples).
std::vector<std::size_t> epoch_order(std::size_t samples, std::uint64_t seed, std::size_t epoch);

/// Runs the schedule from a fresh model, or from `resume` when given. The
/// sample order depends only on (seed, epoch), so a resumed run replays the
/// remaining steps exactly.
TrainResult train(const net::NetworkConfig& net_cfg, const TrainingConfig& cfg,
                  const SampleSet& samples, const TrainOptions& options,
                  const Checkpoint* resume = nullptr);

void write_log_header(std::ostream& out);
void write_log_row(const LogRow& row, std::ostream& out);

}  // namespace a2net::training
