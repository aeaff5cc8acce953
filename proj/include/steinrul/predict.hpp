#pragma once

// Posterior-predictive summaries and the uncertainty-informed correction
//   mu* = mu - p_late * k * sigma,
// where p_late is the fraction of held-out samples whose predictive mean
// exceeds the true RUL.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "steinrul/matrix.hpp"
#include "steinrul/models.hpp"
#include "steinrul/trainers.hpp"

namespace steinrul {

enum class EnsembleSource { kSvgdParticles, kBbbDraws, kPointEstimate };

std::string to_string(EnsembleSource source);

/// Weight realizations whose predictions approximate the posterior predictive.
struct PosteriorEnsemble {
  EnsembleSource source = EnsembleSource::kPointEstimate;
  ModelSpec spec;
  ParamLayout layout;
  std::vector<ParamVector> members;

  std::size_t size() const { return members.size(); }
};

inline constexpr std::size_t kDefaultEvalDraws = 100;

PosteriorEnsemble ensemble_from_particles(const ModelSpec& spec, const ParticleSet& particles);
/// draws fresh reparameterized samples mu + softplus(rho) eps, eps from the
/// "bbb-eval" stream of seed.
PosteriorEnsemble ensemble_from_surrogate(const ModelSpec& spec, const GaussianSurrogate& q,
                                          std::size_t draws, std::uint64_t seed);
PosteriorEnsemble ensemble_from_point(const ModelInstance& model);

struct PredictiveSummary {
  Matrix member_predictions;     // N x M
  std::vector<double> mean;      // mu
  std::vector<double> stddev;    // population std over members
  std::vector<double> corrected; // mu*, equal to mean until correct() runs

  std::size_t size() const { return mean.size(); }
};

/// Reduces an N x M prediction matrix; members are folded in column order.
PredictiveSummary summarize(Matrix member_predictions);

/// Evaluates every member on samples [N,T,F] with dropout off.
PredictiveSummary predictive_summary(const PosteriorEnsemble& ensemble, const Tensor& samples);

struct LatePredictionRate {
  double p_late = 0.0;
  std::size_t evaluated = 0;
};

/// Fraction of samples with mean > target (strict). Throws DataError when empty.
LatePredictionRate estimate_p_late(std::span<const double> means, std::span<const double> targets);
LatePredictionRate estimate_p_late(const PosteriorEnsemble& ensemble, const Tensor& samples,
                                   std::span<const double> targets);

/// mu* = mu - p_late k sigma. Throws ConfigError for k <= 0 or p_late outside [0,1].
std::vector<double> correct(std::span<const double> mean, std::span<const double> stddev,
                            double p_late, double k);
void correct(PredictiveSummary& summary, double p_late, double k);

/// Tab-separated: unit_id, true_rul, mean, std, corrected_mean, member_0..member_{M-1}.
void write_prediction_table(std::ostream& out, const PredictiveSummary& summary,
                            std::span<const int> units, std::span<const double> targets);

}  // namespace steinrul
