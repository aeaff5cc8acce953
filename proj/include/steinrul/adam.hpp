#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace steinrul {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam state for one parameter vector. Moments start at zero.
class Adam {
 public:
  explicit Adam(std::size_t dim, AdamHyper hyper = {});

  /// params -= lr * m_hat / (sqrt(v_hat) + eps), after folding grads into the moments.
  void step(std::span<double> params, std::span<const double> grads, double lr);

  std::size_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  AdamHyper hyper_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace steinrul
