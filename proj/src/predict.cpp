#include "steinrul/predict.hpp"

#include <cmath>
#include <ostream>

#include "parallel.hpp"
#include "steinrul/error.hpp"
#include "steinrul/format.hpp"

namespace steinrul {

std::string to_string(EnsembleSource source) {
  switch (source) {
    case EnsembleSource::kSvgdParticles: return "svgd-particles";
    case EnsembleSource::kBbbDraws: return "bbb-draws";
    case EnsembleSource::kPointEstimate: return "point-estimate";
  }
  return "?";
}

PosteriorEnsemble ensemble_from_particles(const ModelSpec& spec, const ParticleSet& particles) {
  PosteriorEnsemble e{EnsembleSource::kSvgdParticles, spec, build_layout(spec), {}};
  if (particles.cols != e.layout.dimension()) throw ShapeError("particles do not match the model layout");
  for (std::size_t i = 0; i < particles.rows; ++i) {
    const auto row = particles.row(i);
    e.members.push_back(ParamVector{{row.begin(), row.end()}});
  }
  if (e.members.empty()) throw ConfigError("ensemble needs at least one particle");
  return e;
}

PosteriorEnsemble ensemble_from_surrogate(const ModelSpec& spec, const GaussianSurrogate& q,
                                          std::size_t draws, std::uint64_t seed) {
  if (draws == 0) throw ConfigError("ensemble needs at least one draw");
  PosteriorEnsemble e{EnsembleSource::kBbbDraws, spec, build_layout(spec), {}};
  if (q.dimension() != e.layout.dimension()) throw ShapeError("surrogate does not match the model layout");
  std::vector<double> eps(q.dimension());
  for (std::size_t s = 0; s < draws; ++s) {
    Rng stream = make_stream(seed, "bbb-eval", s);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : eps) v = normal(stream);
    e.members.push_back(ParamVector{q.sample(eps)});
  }
  return e;
}

PosteriorEnsemble ensemble_from_point(const ModelInstance& model) {
  return {EnsembleSource::kPointEstimate, model.spec(), model.layout(), {model.params()}};
}

PredictiveSummary summarize(Matrix member_predictions) {
  PredictiveSummary s;
  const std::size_t n = member_predictions.rows, m = member_predictions.cols;
  if (m == 0) throw ConfigError("summarize: no ensemble members");
  s.mean.resize(n);
  s.stddev.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = member_predictions.row(i);
    double sum = 0.0;
    for (double v : row) sum += v;
    const double mu = sum / static_cast<double>(m);
    double ss = 0.0;
    for (double v : row) ss += (v - mu) * (v - mu);
    s.mean[i] = mu;
    s.stddev[i] = std::sqrt(ss / static_cast<double>(m));
  }
  s.corrected = s.mean;
  s.member_predictions = std::move(member_predictions);
  return s;
}

PredictiveSummary predictive_summary(const PosteriorEnsemble& ensemble, const Tensor& samples) {
  if (ensemble.members.empty()) throw ConfigError("predictive_summary: empty ensemble");
  const std::size_t n = samples.dim(0), m = ensemble.size();
  Matrix preds(n, m);
  detail::parallel_for(m, [&](std::size_t j) {
    const auto col = predict_values(ensemble.spec, ensemble.layout, ensemble.members[j], samples);
    for (std::size_t i = 0; i < n; ++i) preds(i, j) = col[i];
  });
  return summarize(std::move(preds));
}

LatePredictionRate estimate_p_late(std::span<const double> means, std::span<const double> targets) {
  if (means.empty()) throw DataError("estimate_p_late: empty held-out set");
  if (means.size() != targets.size()) throw ShapeError("estimate_p_late: size mismatch");
  std::size_t late = 0;
  for (std::size_t i = 0; i < means.size(); ++i) late += means[i] > targets[i] ? 1 : 0;
  return {static_cast<double>(late) / static_cast<double>(means.size()), means.size()};
}

LatePredictionRate estimate_p_late(const PosteriorEnsemble& ensemble, const Tensor& samples,
                                   std::span<const double> targets) {
  if (samples.rank() != 3 || samples.dim(0) == 0) throw DataError("estimate_p_late: empty held-out set");
  const auto summary = predictive_summary(ensemble, samples);
  return estimate_p_late(summary.mean, targets);
}

std::vector<double> correct(std::span<const double> mean, std::span<const double> stddev,
                            double p_late, double k) {
  if (!(k > 0.0)) throw ConfigError("correction factor k must be positive");
  if (!(p_late >= 0.0 && p_late <= 1.0)) throw ConfigError("p_late must lie in [0,1]");
  if (mean.size() != stddev.size()) throw ShapeError("correct: mean/std size mismatch");
  std::vector<double> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) out[i] = mean[i] - p_late * k * stddev[i];
  return out;
}

void correct(PredictiveSummary& summary, double p_late, double k) {
  summary.corrected = correct(summary.mean, summary.stddev, p_late, k);
}

void write_prediction_table(std::ostream& out, const PredictiveSummary& summary,
                            std::span<const int> units, std::span<const double> targets) {
  const std::size_t n = summary.size(), m = summary.member_predictions.cols;
  if (units.size() != n || targets.size() != n) throw ShapeError("prediction table: size mismatch");
  out << "unit_id\ttrue_rul\tmean\tstd\tcorrected_mean";
  for (std::size_t j = 0; j < m; ++j) out << "\tmember_" << j;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << units[i] << '\t' << format_double(targets[i]) << '\t' << format_double(summary.mean[i])
        << '\t' << format_double(summary.stddev[i]) << '\t' << format_double(summary.corrected[i]);
    for (std::size_t j = 0; j < m; ++j) out << '\t' << format_double(summary.member_predictions(i, j));
    out << '\n';
  }
}

}  // namespace steinrul
