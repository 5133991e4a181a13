#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "a2net/net/model.hpp"

namespace a2net::training {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter, in the
/// model's parameter order.
class Adam {
 public:
  Adam() = default;
  Adam(std::span<const net::NamedParameter<float>> params, AdamHyper hyper);

  /// One update from the current gradients; parameters without a gradient
  /// are treated as having a zero gradient.
  void step(std::span<net::NamedParameter<float>> params, double lr);

  std::uint64_t steps() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }
  std::vector<std::vector<float>>& first_moments() { return m_; }
  std::vector<std::vector<float>>& second_moments() { return v_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  void set_hyper(AdamHyper hyper) { hyper_ = hyper; }

 private:
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

}  // namespace a2net::training
