#include <cmath>
#include <string>

#include "steinrul/error.hpp"
#include "steinrul/trainers.hpp"

namespace steinrul {

double nll_gradient(const ModelSpec& spec, const ParamLayout& layout,
                    std::span<const double> weights, const Tensor& batch,
                    const Tensor& batch_targets, double huber_delta, std::span<double> grad,
                    Rng* dropout_stream) {
  Graph g;
  Var w = g.leaf(Tensor({layout.dimension()}, std::vector<double>(weights.begin(), weights.end())));
  Var x = g.constant(batch);
  Var y = g.constant(batch_targets);
  Var loss = huber(build_forward(spec, layout, w, x, dropout_stream), y, huber_delta);
  const double value = g.forward(loss)[0];
  g.backward(loss);
  const Tensor& adj = g.adjoint(w);
  std::copy(adj.values().begin(), adj.values().end(), grad.begin());
  return value;
}

ModelInstance train_backprop(const ModelSpec& spec, const Tensor& samples,
                             std::span<const double> targets, const TrainConfig& config,
                             TrainTrace* trace) {
  config.validate();
  const std::size_t n = samples.rank() == 3 ? samples.dim(0) : 0;
  if (n == 0) throw DataError("train_backprop: empty training set");
  if (targets.size() != n) throw ShapeError("train_backprop: target count mismatch");

  ModelSpec model_spec = spec;
  model_spec.dropout = config.dropout;
  const ParamLayout layout = build_layout(model_spec);
  Rng init = make_stream(config.seed, "init");
  ParamVector params = kaiming_uniform_init(layout, init);
  Adam adam(layout.dimension());
  std::vector<double> grad(layout.dimension());
  Rng shuffle = make_stream(config.seed, "shuffle");

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    const auto batches = make_batches(n, config.batch_size, shuffle);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Rng dropout = make_stream(config.seed, "dropout", epoch, b);
      double loss = 0.0;
      try {
        loss = nll_gradient(model_spec, layout, params.values, gather_samples(samples, batches[b]),
                            gather_targets(targets, batches[b]), config.huber_delta, grad,
                            &dropout);
      } catch (const NumericError& e) {
        throw NumericError("backprop epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(b) + ": " + e.what());
      }
      if (!std::isfinite(loss)) {
        throw NumericError("backprop epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(b) + ": non-finite loss");
      }
      adam.step(params.values, grad, lr);
      epoch_loss += loss;
      if (trace) trace->step_losses.push_back(loss);
    }
    epoch_loss /= static_cast<double>(n);
    if (trace) trace->epoch_losses.push_back(epoch_loss);
    if (config.on_epoch) config.on_epoch(epoch, epoch_loss);
  }
  return ModelInstance(model_spec, std::move(params));
}

}  // namespace steinrul
