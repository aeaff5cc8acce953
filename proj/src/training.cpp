#include "steinrul/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "steinrul/error.hpp"

namespace steinrul {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (decay_epoch > epochs) throw ConfigError("decay_epoch must not exceed epochs");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be positive");
  if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be positive");
  if (mc_samples == 0) throw ConfigError("mc_samples must be positive");
  if (particles == 0) throw ConfigError("particles must be positive");
  if (!(prior_std > 0.0)) throw ConfigError("prior_std must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  return epoch >= config.decay_epoch ? config.learning_rate * config.decay_factor
                                     : config.learning_rate;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size));
    batches.emplace_back(first, last);
  }
  return batches;
}

Tensor gather_samples(const Tensor& samples, std::span<const std::size_t> idx) {
  if (samples.rank() != 3) throw ShapeError("samples must be [N,T,F], got " + shape_string(samples.shape()));
  const std::size_t stride = samples.dim(1) * samples.dim(2);
  Tensor out({idx.size(), samples.dim(1), samples.dim(2)});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (idx[b] >= samples.dim(0)) throw ShapeError("sample index out of range");
    std::copy_n(samples.data() + idx[b] * stride, stride, out.data() + b * stride);
  }
  return out;
}

Tensor gather_targets(std::span<const double> targets, std::span<const std::size_t> idx) {
  Tensor out({idx.size()});
  for (std::size_t b = 0; b < idx.size(); ++b) out[b] = targets[idx[b]];
  return out;
}

double huber_nll(std::span<const double> predictions, std::span<const double> targets,
                 double delta) {
  if (!(delta > 0.0)) throw ConfigError("huber: delta must be positive");
  if (predictions.size() != targets.size()) throw ShapeError("huber: prediction/target size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = std::abs(predictions[i] - targets[i]);
    acc += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
  }
  return acc;
}

}  // namespace steinrul
