#pragma once

// Pieces shared by all three trainers: hyperparameters, learning-rate
// schedule, minibatch partitioning and the Huber negative log-likelihood.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "steinrul/matrix.hpp"
#include "steinrul/rng.hpp"
#include "steinrul/tensor.hpp"

namespace steinrul {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 512;
  double learning_rate = 0.01;
  std::size_t decay_epoch = 40;
  double decay_factor = 0.1;
  double huber_delta = 100.0;
  std::size_t mc_samples = 10;  // Bayes by Backprop draws per batch
  std::size_t particles = 10;   // SVGD particles
  double prior_std = 0.1;       // N(0, 0.01 I)
  double rho_init = 1.0;        // surrogate std softplus(1)
  double dropout = 0.2;         // backprop only
  std::uint64_t seed = 0;
  /// Called after every epoch with (epoch index, mean per-sample loss).
  std::function<void(std::size_t, double)> on_epoch;

  /// Throws ConfigError on non-positive sizes, decay_epoch > epochs, etc.
  void validate() const;
};

/// Learning rate used throughout the given zero-based epoch.
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

/// Shuffled partition of [0, n) into batches of batch_size; the final partial
/// batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng);

/// Rows idx of samples [N,T,F] as a [B,T,F] tensor.
Tensor gather_samples(const Tensor& samples, std::span<const std::size_t> idx);
Tensor gather_targets(std::span<const double> targets, std::span<const std::size_t> idx);

/// Sum over the batch of the Huber loss with threshold delta. Acts as
/// -log p(batch | w) up to a constant.
double huber_nll(std::span<const double> predictions, std::span<const double> targets,
                 double delta);

/// Per-epoch training losses, mainly for tests and logs.
struct TrainTrace {
  std::vector<double> epoch_losses;
  std::vector<double> step_losses;
};

}  // namespace steinrul
