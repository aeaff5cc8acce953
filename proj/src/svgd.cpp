#include <algorithm>
#include <cmath>
#include <string>

#include "parallel.hpp"
#include "steinrul/error.hpp"
#include "steinrul/kernels.hpp"
#include "steinrul/trainers.hpp"

namespace steinrul {

RbfKernel rbf_kernel(const ParticleSet& particles) {
  const std::size_t m = particles.rows;
  if (m == 0) throw ConfigError("rbf_kernel: empty particle set");
  RbfKernel k;
  k.count = m;
  Matrix sq(m, m);
  kernels::pairwise_sq_dist(particles.data, sq.data, m, particles.cols);

  std::vector<double> dists;
  dists.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) dists.push_back(std::sqrt(sq(i, j)));
  if (!dists.empty()) {
    std::sort(dists.begin(), dists.end());
    const std::size_t mid = dists.size() / 2;
    k.median = dists.size() % 2 ? dists[mid] : 0.5 * (dists[mid - 1] + dists[mid]);
  }
  // No pairs, or more than half of them coincident: fall back to h = 1.
  k.bandwidth = k.median > 0.0 ? k.median * k.median / std::log(static_cast<double>(m) + 1.0) : 1.0;

  k.values = Matrix(m, m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i) k.values(j, i) = j == i ? 1.0 : std::exp(-sq(j, i) / k.bandwidth);
  return k;
}

std::vector<double> rbf_kernel_gradient(const ParticleSet& particles, const RbfKernel& kernel,
                                        std::size_t j, std::size_t i) {
  if (j >= particles.rows || i >= particles.rows) throw ConfigError("rbf_kernel_gradient: index out of range");
  const double c = -2.0 / kernel.bandwidth * kernel(j, i);
  std::vector<double> g(particles.cols);
  const auto wj = particles.row(j);
  const auto wi = particles.row(i);
  for (std::size_t t = 0; t < g.size(); ++t) g[t] = c * (wj[t] - wi[t]);
  return g;
}

Matrix svgd_direction(const ParticleSet& particles, const Matrix& grad_log_p) {
  if (grad_log_p.rows != particles.rows || grad_log_p.cols != particles.cols) {
    throw ShapeError("svgd_direction: gradients are " + std::to_string(grad_log_p.rows) + "x" +
                     std::to_string(grad_log_p.cols) + ", particles are " +
                     std::to_string(particles.rows) + "x" + std::to_string(particles.cols));
  }
  const std::size_t m = particles.rows, d = particles.cols;
  if (m == 0) throw ConfigError("svgd_direction: empty particle set");
  // A single particle has k = 1 and no repulsion: plain gradient ascent.
  if (m == 1) return grad_log_p;

  const RbfKernel kernel = rbf_kernel(particles);
  const double two_over_h = 2.0 / kernel.bandwidth;
  const double md = static_cast<double>(m);
  Matrix phi(m, d);
#pragma omp parallel for schedule(static) if (m * m * d >= (1u << 15))
  for (std::size_t i = 0; i < m; ++i) {
    auto out = phi.row(i);
    const auto wi = particles.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double kji = kernel(j, i);
      const double repulse = -two_over_h * kji;
      const auto wj = particles.row(j);
      const auto gj = grad_log_p.row(j);
      for (std::size_t t = 0; t < d; ++t) out[t] += kji * gj[t] + repulse * (wj[t] - wi[t]);
    }
    for (auto& v : out) v /= md;
  }
  return phi;
}

SteinUpdater::SteinUpdater(ParticleSet particles, AdamHyper hyper)
    : particles_(std::move(particles)) {
  if (particles_.rows == 0) throw ConfigError("SteinUpdater: need at least one particle");
  optimizers_.reserve(particles_.rows);
  for (std::size_t i = 0; i < particles_.rows; ++i) optimizers_.emplace_back(particles_.cols, hyper);
}

void SteinUpdater::apply(const Matrix& grad_log_p, double lr) {
  const Matrix phi = svgd_direction(particles_, grad_log_p);
  std::vector<double> neg(particles_.cols);
  for (std::size_t i = 0; i < particles_.rows; ++i) {
    const auto row = phi.row(i);
    for (std::size_t t = 0; t < neg.size(); ++t) neg[t] = -row[t];
    optimizers_[i].step(particles_.row(i), neg, lr);
  }
}

ParticleSet svgd_optimize(ParticleSet init,
                          const std::function<Matrix(const ParticleSet&)>& grad_log_p,
                          std::size_t steps, double lr) {
  SteinUpdater updater(std::move(init));
  for (std::size_t s = 0; s < steps; ++s) updater.apply(grad_log_p(updater.particles()), lr);
  return updater.particles();
}

ParticleSet train_svgd(const ModelSpec& spec, const Tensor& samples,
                       std::span<const double> targets, const TrainConfig& config,
                       TrainTrace* trace) {
  config.validate();
  const std::size_t n = samples.rank() == 3 ? samples.dim(0) : 0;
  if (n == 0) throw DataError("train_svgd: empty training set");
  if (targets.size() != n) throw ShapeError("train_svgd: target count mismatch");

  const ParamLayout layout = build_layout(spec);
  const std::size_t d = layout.dimension();
  const std::size_t m = config.particles;
  ParticleSet init(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    Rng stream = make_stream(config.seed, "init", i);
    std::normal_distribution<double> prior(0.0, config.prior_std);
    for (auto& v : init.row(i)) v = prior(stream);
  }
  SteinUpdater updater(std::move(init));
  const double inv_var = 1.0 / (config.prior_std * config.prior_std);
  Rng shuffle = make_stream(config.seed, "shuffle");
  Matrix grads(m, d);
  std::vector<double> losses(m);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    const auto batches = make_batches(n, config.batch_size, shuffle);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Tensor batch = gather_samples(samples, batches[b]);
      const Tensor batch_targets = gather_targets(targets, batches[b]);
      const double data_scale = static_cast<double>(n) / static_cast<double>(batches[b].size());
      const ParticleSet& particles = updater.particles();
      try {
        detail::parallel_for(m, [&](std::size_t i) {
          auto g = grads.row(i);
          losses[i] = nll_gradient(spec, layout, particles.row(i), batch, batch_targets,
                                   config.huber_delta, g);
          const auto w = particles.row(i);
          for (std::size_t t = 0; t < d; ++t) g[t] = -data_scale * g[t] - w[t] * inv_var;
        });
      } catch (const NumericError& e) {
        throw NumericError("svgd epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": " + e.what());
      }
      double loss = 0.0;
      for (double l : losses) loss += l;
      loss /= static_cast<double>(m);
      if (!std::isfinite(loss)) {
        throw NumericError("svgd epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": non-finite loss");
      }
      updater.apply(grads, lr);
      epoch_loss += loss;
      if (trace) trace->step_losses.push_back(loss);
    }
    epoch_loss /= static_cast<double>(n);
    if (trace) trace->epoch_losses.push_back(epoch_loss);
    if (config.on_epoch) config.on_epoch(epoch, epoch_loss);
  }
  return updater.particles();
}

}  // namespace steinrul
