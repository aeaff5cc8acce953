#include "steinrul/metrics.hpp"

#include <cmath>

#include "steinrul/error.hpp"

namespace steinrul {
namespace {
void require_nonempty(std::span<const double> d, const char* what) {
  if (d.empty()) throw DataError(std::string(what) + ": empty error vector");
}
}  // namespace

std::vector<double> errors(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) throw ShapeError("errors: prediction/truth size mismatch");
  std::vector<double> d(predictions.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = predictions[i] - truth[i];
  return d;
}

double rmse(std::span<const double> d) {
  require_nonempty(d, "rmse");
  double acc = 0.0;
  for (double v : d) acc += v * v;
  return std::sqrt(acc / static_cast<double>(d.size()));
}

double mae(std::span<const double> d) {
  require_nonempty(d, "mae");
  double acc = 0.0;
  for (double v : d) acc += std::abs(v);
  return acc / static_cast<double>(d.size());
}

double score(std::span<const double> d) {
  require_nonempty(d, "score");
  double acc = 0.0;
  for (double v : d) acc += std::expm1(v < 0.0 ? -v / 13.0 : v / 10.0);
  return acc;
}

MetricTriple evaluate(std::span<const double> predictions, std::span<const double> truth) {
  const auto d = errors(predictions, truth);
  return {rmse(d), mae(d), score(d)};
}

}  // namespace steinrul
