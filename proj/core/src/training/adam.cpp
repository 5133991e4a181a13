#include "a2net/training/adam.hpp"

#include <cmath>

#include "a2net/errors.hpp"

namespace a2net::training {

Adam::Adam(std::span<const net::NamedParameter<float>> params, AdamHyper hyper) : hyper_(hyper) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.numel(), 0.0f);
    v_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void Adam::step(std::span<net::NamedParameter<float>> params, double lr) {
  if (params.size() != m_.size()) {
    throw Error("adam: optimizer holds " + std::to_string(m_.size()) + " moments for " +
                std::to_string(params.size()) + " parameters");
  }
  ++t_;
  const double b1 = hyper_.beta1, b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& tensor = params[k].tensor;
    auto w = tensor.mutable_data();
    const auto g = tensor.grad();
    const bool has = !g.empty();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has ? static_cast<double>(g[i]) : 0.0;
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + hyper_.epsilon);
      w[i] = static_cast<float>(static_cast<double>(w[i]) - update);
    }
  }
}

}  // namespace a2net::training
