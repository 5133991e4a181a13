#include "a2net/training/schedule.hpp"

#include <string>

#include "a2net/errors.hpp"

namespace a2net::training {

void TrainingConfig::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (total_epochs() < 1) throw ConfigError("epochs_constant + epochs_decay must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  objective::LossWeights{alpha}.validate();
}

double lr_at(std::size_t epoch, const TrainingConfig& cfg) {
  if (epoch >= cfg.total_epochs()) {
    throw ConfigError("lr_at: epoch " + std::to_string(epoch) + " is outside the " +
                      std::to_string(cfg.total_epochs()) + "-epoch schedule");
  }
  if (epoch < cfg.epochs_constant) return cfg.base_lr;
  const double done = static_cast<double>(epoch - cfg.epochs_constant + 1);
  return cfg.base_lr * (1.0 - done / static_cast<double>(cfg.epochs_decay));
}

}  // namespace a2net::training
