#pragma once

// Experiment runner: multi-seed training and evaluation on one C-MAPSS
// subset, cross-product sweeps, and export of the raw data behind
// posterior/predictive distribution plots.
//
// Output directory of a run:
//   report.jsonl             one "seed" record per seed, then one "aggregate"
//   predictions_seed<S>.tsv  per test sample predictions (see predict.hpp)
//   posterior_seed<S>.bin    trained particles / surrogate / point estimate
//   timings.jsonl            wall-clock per phase (kept out of report.jsonl so
//                            reports stay byte-identical across runs)

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steinrul/metrics.hpp"
#include "steinrul/models.hpp"
#include "steinrul/predict.hpp"
#include "steinrul/trainers.hpp"

namespace steinrul {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kReportSchema = 1;
inline constexpr const char* kDataDirEnv = "STEINRUL_DATA_DIR";

enum class TrainerKind { kBackprop, kBbb, kSvgd };
std::string to_string(TrainerKind kind);
TrainerKind parse_trainer_kind(const std::string& s);

struct RunConfig {
  std::string subset = "FD001";
  ModelKind model = ModelKind::kDense3;
  TrainerKind trainer = TrainerKind::kSvgd;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::filesystem::path data_dir;    // falls back to $STEINRUL_DATA_DIR
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;   // default <output_dir>/cache
  bool use_cache = true;
  TrainConfig train;
  double correction_k = 1.0;
  std::size_t eval_draws = kDefaultEvalDraws;  // BBB predictive draws
  int threads = 0;
  bool quiet = false;

  void validate() const;
};

/// Applies one key=value setting. Throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Flat key=value lines; '#' starts a comment. Keys are returned in file order.
std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path& file);

/// "0..9", "3" or "0,2,5".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

/// Settings echoed into reports. Omits output paths.
nlohmann::ordered_json config_json(const RunConfig& config);

struct SeedResult {
  std::uint64_t seed = 0;
  MetricTriple raw;
  std::optional<MetricTriple> corrected;  // absent for backprop
  std::optional<double> p_late;
  std::size_t test_samples = 0;
  std::size_t members = 0;
  double preprocess_seconds = 0.0;
  double train_seconds = 0.0;
  double evaluate_seconds = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population std across seeds
};

struct RunReport {
  RunConfig config;
  std::vector<SeedResult> seeds;
  std::map<std::string, Aggregate> aggregate;  // "rmse", "rmse_corrected", "p_late", ...

  /// Report lines exactly as written to report.jsonl.
  std::vector<std::string> jsonl() const;
};

Aggregate aggregate_of(const std::vector<double>& values);

/// Trains, evaluates and writes all outputs for every seed.
RunReport run(const RunConfig& config);

// ---------------------------------------------------------------------------

/// What a trainer produced, in a form that can be saved and reloaded.
struct TrainedPosterior {
  EnsembleSource source = EnsembleSource::kPointEstimate;
  ModelSpec spec;
  ParticleSet particles;        // svgd
  GaussianSurrogate surrogate;  // bbb
  ParamVector point;            // backprop
};

void save_posterior(const std::filesystem::path& file, const TrainedPosterior& posterior);
TrainedPosterior load_posterior(const std::filesystem::path& file);
PosteriorEnsemble make_ensemble(const TrainedPosterior& posterior, std::size_t eval_draws,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------

struct SweepCell {
  std::string subset;
  ModelKind model;
  TrainerKind trainer;
  std::optional<RunReport> report;
  std::string error;  // set when the cell failed
  int exit_code = 0;
};

struct SweepReport {
  std::vector<SweepCell> cells;
  std::size_t failures() const;
  /// Exit code of the first failed cell, 0 when all succeeded.
  int exit_code() const;
};

/// Cross product of subsets x models x trainers over a base configuration.
std::vector<RunConfig> expand_sweep(const RunConfig& base, const std::vector<std::string>& subsets,
                                    const std::vector<ModelKind>& models,
                                    const std::vector<TrainerKind>& trainers);

/// Runs each configuration; a failing cell is recorded and the sweep goes on.
/// Writes sweep.jsonl and table.tsv under output_dir. Throws UsageError for
/// an empty list.
SweepReport sweep(const std::vector<RunConfig>& configs, const std::filesystem::path& output_dir);

/// Parses a sweep file: run keys plus subsets=, models=, trainers= lists.
std::vector<RunConfig> load_sweep_file(const std::filesystem::path& file,
                                       std::filesystem::path* output_dir);

/// Table-4 style text: one row per (subset, metric), mean/std per model-trainer.
std::string sweep_table(const SweepReport& report);

// ---------------------------------------------------------------------------

struct DistributionRequest {
  std::filesystem::path report;
  std::size_t weight_index = 0;
  std::size_t sample_index = 0;
  std::optional<std::uint64_t> seed;   // default: first seed of the run
  std::filesystem::path data_dir;      // default: the run's data_dir
  std::filesystem::path output;        // default: next to the report
};

/// Writes prior parameters, per-member values of one weight coordinate and
/// per-member predictions for one test sample. Returns the written JSON.
nlohmann::ordered_json emit_distributions(const DistributionRequest& request);

}  // namespace steinrul
