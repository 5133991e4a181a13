#pragma once

#include <cstddef>
#include <cstdint>

#include "a2net/objective/objective.hpp"

namespace a2net::training {

struct TrainingConfig {
  double base_lr = 2e-4;
  std::size_t epochs_constant = 100;
  std::size_t epochs_decay = 100;
  std::size_t batch_size = 4;
  double alpha = 0.6;
  objective::LossMode loss_mode = objective::LossMode::mse_ssim;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 10;  // epochs; 0 writes only the final checkpoint

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  std::size_t total_epochs() const { return epochs_constant + epochs_decay; }
};

/// Constant base_lr for the first epochs_constant epochs, then a linear
/// per-epoch decay that reaches 0 in the last epoch. Throws ConfigError
/// for epochs outside the schedule.
double lr_at(std::size_t epoch, const TrainingConfig& cfg);

}  // namespace a2net::training
