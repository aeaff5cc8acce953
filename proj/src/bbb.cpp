#include <cmath>
#include <string>

#include "parallel.hpp"
#include "steinrul/error.hpp"
#include "steinrul/trainers.hpp"

namespace steinrul {

std::vector<double> GaussianSurrogate::stddev() const {
  std::vector<double> out(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) out[i] = softplus(rho[i]);
  return out;
}

std::vector<double> GaussianSurrogate::sample(std::span<const double> eps) const {
  if (eps.size() != mu.size()) throw ShapeError("surrogate sample: eps has wrong length");
  std::vector<double> w(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) w[i] = mu[i] + softplus(rho[i]) * eps[i];
  return w;
}

namespace {

struct DrawResult {
  double complexity = 0.0;
  double likelihood = 0.0;
  std::vector<double> grad_mu, grad_rho;
};

DrawResult evaluate_draw(const GaussianSurrogate& q, const PriorSpec& prior,
                         std::span<const double> eps, const ElboWeights& weights,
                         const NllBuilder& nll) {
  const std::size_t d = q.dimension();
  Graph g;
  Var mu = g.leaf(Tensor({d}, q.mu));
  Var rho = g.leaf(Tensor({d}, q.rho));
  Var noise = g.constant(Tensor({d}, std::vector<double>(eps.begin(), eps.end())));
  Var sigma = softplus(rho);
  Var w = mu + sigma * noise;
  Var log_q = gaussian_log_density(w, mu, sigma);
  Var log_p = gaussian_log_density(w, g.constant(Tensor({d}, 0.0)),
                                   g.constant(Tensor({d}, prior.stddev)));
  Var complexity = log_q - log_p;
  Var total = scale(complexity, weights.complexity);
  Var likelihood{};
  const bool with_likelihood = nll && weights.likelihood != 0.0;
  if (with_likelihood) {
    likelihood = nll(w);
    total = total + scale(likelihood, weights.likelihood);
  }
  g.forward(total);
  g.backward(total);

  DrawResult r;
  r.complexity = g.value(complexity)[0];
  r.likelihood = with_likelihood ? g.value(likelihood)[0] : 0.0;
  const auto gm = g.adjoint(mu).values();
  const auto gr = g.adjoint(rho).values();
  r.grad_mu.assign(gm.begin(), gm.end());
  r.grad_rho.assign(gr.begin(), gr.end());
  return r;
}

}  // namespace

ElboEvaluation bbb_elbo(const GaussianSurrogate& surrogate, const PriorSpec& prior,
                        std::span<const std::vector<double>> eps, const ElboWeights& weights,
                        const NllBuilder& nll) {
  if (eps.empty()) throw ConfigError("bbb_elbo: at least one Monte Carlo sample is required");
  if (surrogate.rho.size() != surrogate.mu.size()) throw ShapeError("bbb_elbo: mu/rho size mismatch");
  if (!(prior.stddev > 0.0)) throw ConfigError("bbb_elbo: prior stddev must be positive");
  const std::size_t m = eps.size();
  std::vector<DrawResult> draws(m);
  detail::parallel_for(m, [&](std::size_t i) {
    draws[i] = evaluate_draw(surrogate, prior, eps[i], weights, nll);
  });

  ElboEvaluation out;
  out.grad_mu.assign(surrogate.dimension(), 0.0);
  out.grad_rho.assign(surrogate.dimension(), 0.0);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (const auto& r : draws) {
    out.complexity += r.complexity;
    out.likelihood += r.likelihood;
    for (std::size_t k = 0; k < out.grad_mu.size(); ++k) {
      out.grad_mu[k] += r.grad_mu[k];
      out.grad_rho[k] += r.grad_rho[k];
    }
  }
  out.complexity *= inv_m;
  out.likelihood *= inv_m;
  for (std::size_t k = 0; k < out.grad_mu.size(); ++k) {
    out.grad_mu[k] *= inv_m;
    out.grad_rho[k] *= inv_m;
  }
  out.loss = weights.complexity * out.complexity + weights.likelihood * out.likelihood;
  return out;
}

ElboEvaluation bbb_elbo(const GaussianSurrogate& surrogate, const PriorSpec& prior,
                        const ModelSpec& spec, const ParamLayout& layout, const Tensor& batch,
                        const Tensor& batch_targets, double huber_delta,
                        std::span<const std::vector<double>> eps, const ElboWeights& weights) {
  if (surrogate.dimension() != layout.dimension()) {
    throw ShapeError("bbb_elbo: surrogate dimension does not match the model layout");
  }
  NllBuilder nll = [&](Var w) {
    Graph& g = *w.graph;
    return huber(build_forward(spec, layout, w, g.constant(batch)), g.constant(batch_targets),
                 huber_delta);
  };
  return bbb_elbo(surrogate, prior, eps, weights, nll);
}

GaussianSurrogate train_bbb(const ModelSpec& spec, const Tensor& samples,
                            std::span<const double> targets, const TrainConfig& config,
                            TrainTrace* trace) {
  config.validate();
  const std::size_t n = samples.rank() == 3 ? samples.dim(0) : 0;
  if (n == 0) throw DataError("train_bbb: empty training set");
  if (targets.size() != n) throw ShapeError("train_bbb: target count mismatch");

  const ParamLayout layout = build_layout(spec);
  const std::size_t d = layout.dimension();
  GaussianSurrogate q{std::vector<double>(d, 0.0), std::vector<double>(d, config.rho_init)};
  const PriorSpec prior{config.prior_std};
  Adam adam_mu(d), adam_rho(d);
  Rng shuffle = make_stream(config.seed, "shuffle");
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const ElboWeights weights{1.0 / static_cast<double>(batches_per_epoch), 1.0};

  std::size_t step = 0;
  std::vector<std::vector<double>> eps(config.mc_samples, std::vector<double>(d));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    const auto batches = make_batches(n, config.batch_size, shuffle);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b, ++step) {
      for (std::size_t s = 0; s < config.mc_samples; ++s) {
        Rng stream = make_stream(config.seed, "bbb-eps", step, s);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& e : eps[s]) e = normal(stream);
      }
      ElboEvaluation elbo;
      try {
        elbo = bbb_elbo(q, prior, spec, layout, gather_samples(samples, batches[b]),
                        gather_targets(targets, batches[b]), config.huber_delta, eps, weights);
      } catch (const NumericError& e) {
        throw NumericError("bbb epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": " + e.what());
      }
      if (!std::isfinite(elbo.loss)) {
        throw NumericError("bbb epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": non-finite loss");
      }
      adam_mu.step(q.mu, elbo.grad_mu, lr);
      adam_rho.step(q.rho, elbo.grad_rho, lr);
      epoch_loss += elbo.loss;
      if (trace) trace->step_losses.push_back(elbo.loss);
    }
    epoch_loss /= static_cast<double>(n);
    if (trace) trace->epoch_losses.push_back(epoch_loss);
    if (config.on_epoch) config.on_epoch(epoch, epoch_loss);
  }
  return q;
}

}  // namespace steinrul
