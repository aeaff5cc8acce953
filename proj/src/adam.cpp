#include "steinrul/adam.hpp"

#include <cmath>

#include "steinrul/error.hpp"

namespace steinrul {

Adam::Adam(std::size_t dim, AdamHyper hyper) : hyper_(hyper), m_(dim, 0.0), v_(dim, 0.0) {
  if (hyper.beta1 < 0.0 || hyper.beta1 >= 1.0 || hyper.beta2 < 0.0 || hyper.beta2 >= 1.0) {
    throw ConfigError("adam: beta parameters must lie in [0,1)");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " parameters");
  }
  ++t_;
  const double b1 = hyper_.beta1, b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + hyper_.epsilon);
  }
}

}  // namespace steinrul
