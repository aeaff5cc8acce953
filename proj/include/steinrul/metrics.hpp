#pragma once

#include <span>
#include <vector>

namespace steinrul {

/// d_i = prediction_i - true_i. Throws ShapeError on size mismatch.
std::vector<double> errors(std::span<const double> predictions, std::span<const double> truth);

// All three throw DataError on an empty input.
double rmse(std::span<const double> d);
double mae(std::span<const double> d);
/// sum_i exp(s_i) - 1 with s_i = -d_i/13 for d_i < 0, d_i/10 otherwise.
double score(std::span<const double> d);

struct MetricTriple {
  double rmse = 0.0;
  double mae = 0.0;
  double score = 0.0;
};

MetricTriple evaluate(std::span<const double> predictions, std::span<const double> truth);

}  // namespace steinrul
