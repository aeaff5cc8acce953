#pragma once

// C-MAPSS ingestion and preprocessing: feature selection, min-max scaling to
// [-1, 1], sliding windows and piece-wise linear target rectification.
//
// Feature column order (before selection) is fixed:
//   0..2   operational settings 1..3
//   3..23  sensors 1..21
// FD001/FD003 keep sensors 2,3,4,7,8,9,11,12,13,14,15,17,20,21 (in that
// order) and drop the settings. FD002/FD004 keep all 24 columns in the order
// above (settings first).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "steinrul/matrix.hpp"
#include "steinrul/tensor.hpp"

namespace steinrul {

inline constexpr std::size_t kRawColumns = 26;
inline constexpr std::size_t kSettings = 3;
inline constexpr std::size_t kSensors = 21;
inline constexpr std::size_t kAllFeatures = kSettings + kSensors;

struct RawTrajectory {
  int unit = 0;
  std::vector<int> cycles;
  Matrix features;  // L x 24, settings then sensors
  std::size_t length() const { return cycles.size(); }
};

struct SubsetConfig {
  std::string name;
  std::size_t window = 0;            // T
  std::vector<std::size_t> columns;  // indices into the 24 raw features
  double r_early = 125.0;
  // Published reference counts for the official files.
  std::size_t train_trajectories = 0;
  std::size_t test_trajectories = 0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;

  std::size_t features() const { return columns.size(); }
};

/// FD001..FD004. Throws ConfigError for any other name.
SubsetConfig subset_config(const std::string& name);
const std::vector<std::string>& subset_names();

struct SubsetFiles {
  std::vector<RawTrajectory> train;
  std::vector<RawTrajectory> test;
  std::vector<double> test_rul;
};

/// Parses one space-separated trajectory file. Throws ParseError with the
/// file and line on bad width, non-numeric fields or non-monotone cycles.
std::vector<RawTrajectory> parse_trajectories(const std::filesystem::path& file);
std::vector<double> parse_rul(const std::filesystem::path& file);

/// Reads train_<name>.txt, test_<name>.txt and RUL_<name>.txt from dir.
SubsetFiles load_subset(const std::filesystem::path& dir, const std::string& name);

/// L x F matrix of the configured columns.
Matrix select_features(const RawTrajectory& trajectory, const SubsetConfig& config);

struct NormStats {
  std::vector<double> min;
  std::vector<double> max;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

NormStats fit_normalizer(const std::vector<Matrix>& train);
/// x' = 2 (x - min) / (max - min) - 1, unclipped. Constant features map to 0.
Matrix apply_normalizer(const Matrix& x, const NormStats& stats);
Matrix denormalize(const Matrix& x, const NormStats& stats);

/// min(rul, r_early); throws DataError for negative rul.
double rectify(double rul, double r_early);

/// Windows as [N,T,F] samples with targets and their origin.
struct WindowedDataset {
  std::size_t window = 0;
  std::size_t features = 0;
  std::vector<double> samples;  // N * T * F
  std::vector<double> targets;
  std::vector<int> units;
  std::vector<int> end_cycles;

  std::size_t size() const { return targets.size(); }
  Tensor sample_tensor() const;
  void append(const WindowedDataset& other);
  friend bool operator==(const WindowedDataset&, const WindowedDataset&) = default;
};

/// All L - T + 1 windows of a training trajectory (none if L < T). The window
/// ending at 1-based row t has target rectify(L - t).
WindowedDataset window_train(const Matrix& trajectory, std::size_t window, double r_early,
                             int unit = 0, const std::vector<int>& cycles = {});

/// The last T rows as one sample with target rectify(true_rul); nullopt if L < T.
std::optional<WindowedDataset> window_test(const Matrix& trajectory, std::size_t window,
                                           double true_rul, double r_early, int unit = 0,
                                           int end_cycle = 0);

struct PreparedSubset {
  SubsetConfig config;
  NormStats stats;
  WindowedDataset train;
  WindowedDataset test;
  std::size_t discarded_train = 0;
  std::size_t discarded_test = 0;
};

/// Full pipeline. Normalization statistics come from training data only.
PreparedSubset prepare_subset(const SubsetFiles& files, const SubsetConfig& config);

}  // namespace steinrul
