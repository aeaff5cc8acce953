#pragma once

// Maximum-likelihood backpropagation, Bayes by Backprop and Stein variational
// gradient descent over the architectures in models.hpp.
//
// All trainers consume a windowed sample tensor [N,T,F] with N targets and
// are deterministic functions of (model spec, data, config). Randomness comes
// from labeled streams derived from config.seed.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "steinrul/adam.hpp"
#include "steinrul/autodiff.hpp"
#include "steinrul/models.hpp"
#include "steinrul/training.hpp"

namespace steinrul {

// ---------------------------------------------------------------------------
// Backpropagation (frequentist baseline)

/// Kaiming-uniform init, dropout active, Adam on the summed batch Huber loss.
ModelInstance train_backprop(const ModelSpec& spec, const Tensor& samples,
                             std::span<const double> targets, const TrainConfig& config,
                             TrainTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Bayes by Backprop

/// Zero-mean isotropic Gaussian prior.
struct PriorSpec {
  double stddev = 0.1;
};

/// Factorized Gaussian q(w | mu, rho) with std = softplus(rho).
struct GaussianSurrogate {
  std::vector<double> mu;
  std::vector<double> rho;

  std::size_t dimension() const { return mu.size(); }
  std::vector<double> stddev() const;
  /// mu + softplus(rho) * eps.
  std::vector<double> sample(std::span<const double> eps) const;
};

/// Scales applied to the two ELBO terms of each Monte Carlo draw.
struct ElboWeights {
  double complexity = 1.0;  // log q - log p
  double likelihood = 1.0;  // negative log-likelihood
};

struct ElboEvaluation {
  double loss = 0.0;        // (1/M) sum_i [c (log q - log p) + l NLL]
  double complexity = 0.0;  // (1/M) sum_i (log q - log p), unweighted
  double likelihood = 0.0;  // (1/M) sum_i NLL, unweighted
  std::vector<double> grad_mu;
  std::vector<double> grad_rho;
};

/// Builds -log p(data | w) on w's graph.
using NllBuilder = std::function<Var(Var weights)>;

/// Monte Carlo ELBO with reparameterized draws w_i = mu + softplus(rho) eps_i,
/// one draw per entry of eps. Gradients flow to mu and rho through every w_i.
ElboEvaluation bbb_elbo(const GaussianSurrogate& surrogate, const PriorSpec& prior,
                        std::span<const std::vector<double>> eps, const ElboWeights& weights,
                        const NllBuilder& nll);

/// Same objective with the network's summed Huber loss on one batch.
ElboEvaluation bbb_elbo(const GaussianSurrogate& surrogate, const PriorSpec& prior,
                        const ModelSpec& spec, const ParamLayout& layout, const Tensor& batch,
                        const Tensor& batch_targets, double huber_delta,
                        std::span<const std::vector<double>> eps, const ElboWeights& weights);

/// mu = 0, rho = config.rho_init; Adam on (mu, rho); complexity weighted by
/// 1 / (batches per epoch).
GaussianSurrogate train_bbb(const ModelSpec& spec, const Tensor& samples,
                            std::span<const double> targets, const TrainConfig& config,
                            TrainTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Stein variational gradient descent

/// M particles as rows of an M x D matrix; all share one parameter layout.
using ParticleSet = Matrix;

struct RbfKernel {
  std::size_t count = 0;
  double median = 0.0;     // median pairwise Euclidean distance
  double bandwidth = 1.0;  // h = median^2 / log(M + 1)
  Matrix values;           // values(j, i) = k(w_j, w_i)

  double operator()(std::size_t j, std::size_t i) const { return values(j, i); }
};

/// k(w_j, w_i) = exp(-||w_j - w_i||^2 / h). With M = 1 (or all particles
/// coincident) the bandwidth is set to 1.
RbfKernel rbf_kernel(const ParticleSet& particles);

/// grad_{w_j} k(w_j, w_i) = -(2/h)(w_j - w_i) k(w_j, w_i).
std::vector<double> rbf_kernel_gradient(const ParticleSet& particles, const RbfKernel& kernel,
                                        std::size_t j, std::size_t i);

/// phi(w_i) = (1/M) sum_j [k(w_j,w_i) grad_log_p(w_j) + grad_{w_j} k(w_j,w_i)].
/// With one particle this is exactly grad_log_p.
Matrix svgd_direction(const ParticleSet& particles, const Matrix& grad_log_p);

/// Particles with one Adam state each. apply() moves every particle along
/// phi by handing -phi to its optimizer.
class SteinUpdater {
 public:
  SteinUpdater(ParticleSet particles, AdamHyper hyper = {});

  /// Computes the direction from the current particles and steps them.
  void apply(const Matrix& grad_log_p, double lr);

  const ParticleSet& particles() const { return particles_; }

 private:
  ParticleSet particles_;
  std::vector<Adam> optimizers_;
};

/// Runs steps of SVGD+Adam against an arbitrary log-density gradient.
ParticleSet svgd_optimize(ParticleSet init,
                          const std::function<Matrix(const ParticleSet&)>& grad_log_p,
                          std::size_t steps, double lr);

/// Particles drawn from the prior, then per batch:
/// grad log p(w|D) = -(N/B) grad NLL(batch) - w / prior_std^2.
ParticleSet train_svgd(const ModelSpec& spec, const Tensor& samples,
                       std::span<const double> targets, const TrainConfig& config,
                       TrainTrace* trace = nullptr);

/// Gradient of the summed batch Huber loss w.r.t. a flat weight vector.
/// Returns the loss value alongside.
double nll_gradient(const ModelSpec& spec, const ParamLayout& layout,
                    std::span<const double> weights, const Tensor& batch,
                    const Tensor& batch_targets, double huber_delta, std::span<double> grad,
                    Rng* dropout_stream = nullptr);

}  // namespace steinrul
