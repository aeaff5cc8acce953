#include "steinrul/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <string_view>

#include "steinrul/error.hpp"
#include "steinrul/logging.hpp"

namespace steinrul {
namespace {

std::vector<std::size_t> sensor_columns(std::initializer_list<std::size_t> sensors) {
  std::vector<std::size_t> cols;
  for (auto s : sensors) cols.push_back(kSettings + s - 1);
  return cols;
}

std::vector<std::size_t> all_columns() {
  std::vector<std::size_t> cols(kAllFeatures);
  for (std::size_t i = 0; i < kAllFeatures; ++i) cols[i] = i;
  return cols;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream open_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  return in;
}

}  // namespace

const std::vector<std::string>& subset_names() {
  static const std::vector<std::string> names{"FD001", "FD002", "FD003", "FD004"};
  return names;
}

SubsetConfig subset_config(const std::string& name) {
  const auto reduced = sensor_columns({2, 3, 4, 7, 8, 9, 11, 12, 13, 14, 15, 17, 20, 21});
  if (name == "FD001") return {name, 30, reduced, 125.0, 100, 100, 17731, 100};
  if (name == "FD002") return {name, 20, all_columns(), 125.0, 260, 259, 48819, 259};
  if (name == "FD003") return {name, 30, reduced, 125.0, 100, 100, 21820, 100};
  if (name == "FD004") return {name, 15, all_columns(), 125.0, 249, 248, 57763, 248};
  throw ConfigError("unknown subset '" + name + "' (expected FD001..FD004)");
}

std::vector<RawTrajectory> parse_trajectories(const std::filesystem::path& file) {
  std::ifstream in = open_or_throw(file);
  const std::string fname = file.string();
  std::vector<RawTrajectory> out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> buffer;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != kRawColumns) {
      throw ParseError(fname, lineno, "expected " + std::to_string(kRawColumns) + " fields, got " +
                                          std::to_string(fields.size()));
    }
    double values[kRawColumns];
    for (std::size_t c = 0; c < kRawColumns; ++c) {
      if (!parse_double(fields[c], values[c])) {
        throw ParseError(fname, lineno, "field " + std::to_string(c + 1) + " is not numeric: '" +
                                            std::string(fields[c]) + "'");
      }
    }
    const int unit = static_cast<int>(values[0]);
    const int cycle = static_cast<int>(values[1]);
    if (values[0] != unit || values[1] != cycle) {
      throw ParseError(fname, lineno, "unit and cycle must be integers");
    }
    if (out.empty() || out.back().unit != unit) {
      for (const auto& t : out) {
        if (t.unit == unit) throw ParseError(fname, lineno, "unit " + std::to_string(unit) + " is not contiguous");
      }
      if (cycle != 1) throw ParseError(fname, lineno, "trajectory must start at cycle 1");
      RawTrajectory t;
      t.unit = unit;
      out.push_back(std::move(t));
    } else if (cycle <= out.back().cycles.back()) {
      throw ParseError(fname, lineno, "cycles must be strictly increasing");
    }
    RawTrajectory& t = out.back();
    t.cycles.push_back(cycle);
    t.features.data.insert(t.features.data.end(), values + 2, values + kRawColumns);
    t.features.rows = t.cycles.size();
    t.features.cols = kAllFeatures;
  }
  return out;
}

std::vector<double> parse_rul(const std::filesystem::path& file) {
  std::ifstream in = open_or_throw(file);
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    double v = 0.0;
    if (fields.size() != 1 || !parse_double(fields[0], v)) {
      throw ParseError(file.string(), lineno, "expected one RUL value per line");
    }
    if (v < 0) throw ParseError(file.string(), lineno, "negative RUL");
    out.push_back(v);
  }
  return out;
}

SubsetFiles load_subset(const std::filesystem::path& dir, const std::string& name) {
  SubsetFiles f;
  f.train = parse_trajectories(dir / ("train_" + name + ".txt"));
  f.test = parse_trajectories(dir / ("test_" + name + ".txt"));
  f.test_rul = parse_rul(dir / ("RUL_" + name + ".txt"));
  if (f.test_rul.size() != f.test.size()) {
    throw DataError("RUL_" + name + ".txt has " + std::to_string(f.test_rul.size()) +
                    " values for " + std::to_string(f.test.size()) + " test trajectories");
  }
  if (f.train.empty()) throw DataError("train_" + name + ".txt contains no trajectories");
  return f;
}

Matrix select_features(const RawTrajectory& trajectory, const SubsetConfig& config) {
  const std::size_t l = trajectory.length();
  Matrix out(l, config.features());
  for (std::size_t r = 0; r < l; ++r)
    for (std::size_t c = 0; c < config.columns.size(); ++c)
      out(r, c) = trajectory.features(r, config.columns[c]);
  return out;
}

NormStats fit_normalizer(const std::vector<Matrix>& train) {
  if (train.empty()) throw DataError("fit_normalizer: no training data");
  const std::size_t f = train.front().cols;
  NormStats s{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
  bool first = true;
  for (const auto& m : train) {
    if (m.cols != f) throw ShapeError("fit_normalizer: inconsistent feature counts");
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < f; ++c) {
        const double v = m(r, c);
        if (first) {
          s.min[c] = s.max[c] = v;
        } else {
          s.min[c] = std::min(s.min[c], v);
          s.max[c] = std::max(s.max[c], v);
        }
      }
      first = false;
    }
  }
  if (first) throw DataError("fit_normalizer: no training rows");
  for (std::size_t c = 0; c < f; ++c) {
    if (s.max[c] == s.min[c]) {
      logging::warn("feature " + std::to_string(c) + " is constant in the training data; mapped to 0");
    }
  }
  return s;
}

Matrix apply_normalizer(const Matrix& x, const NormStats& stats) {
  if (x.cols != stats.min.size()) throw ShapeError("apply_normalizer: feature count mismatch");
  Matrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double range = stats.max[c] - stats.min[c];
      out(r, c) = range > 0.0 ? 2.0 * (x(r, c) - stats.min[c]) / range - 1.0 : 0.0;
    }
  }
  return out;
}

Matrix denormalize(const Matrix& x, const NormStats& stats) {
  if (x.cols != stats.min.size()) throw ShapeError("denormalize: feature count mismatch");
  Matrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double range = stats.max[c] - stats.min[c];
      out(r, c) = range > 0.0 ? (x(r, c) + 1.0) * range / 2.0 + stats.min[c] : stats.min[c];
    }
  }
  return out;
}

double rectify(double rul, double r_early) {
  if (rul < 0.0) throw DataError("rectify: negative RUL " + std::to_string(rul));
  return std::min(rul, r_early);
}

Tensor WindowedDataset::sample_tensor() const {
  if (size() == 0) throw DataError("empty windowed dataset");
  return Tensor({size(), window, features}, samples);
}

void WindowedDataset::append(const WindowedDataset& other) {
  if (other.size() == 0) return;
  if (size() == 0 && samples.empty()) {
    window = other.window;
    features = other.features;
  } else if (other.window != window || other.features != features) {
    throw ShapeError("WindowedDataset::append: window geometry mismatch");
  }
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
  targets.insert(targets.end(), other.targets.begin(), other.targets.end());
  units.insert(units.end(), other.units.begin(), other.units.end());
  end_cycles.insert(end_cycles.end(), other.end_cycles.begin(), other.end_cycles.end());
}

WindowedDataset window_train(const Matrix& trajectory, std::size_t window, double r_early,
                             int unit, const std::vector<int>& cycles) {
  WindowedDataset out;
  out.window = window;
  out.features = trajectory.cols;
  const std::size_t l = trajectory.rows;
  if (window == 0) throw ConfigError("window size must be positive");
  if (l < window) return out;
  const std::size_t count = l - window + 1;
  const std::size_t stride = window * trajectory.cols;
  out.samples.reserve(count * stride);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t end_row = s + window;  // 1-based index of the last row
    auto first = trajectory.data.begin() + static_cast<std::ptrdiff_t>(s * trajectory.cols);
    out.samples.insert(out.samples.end(), first, first + static_cast<std::ptrdiff_t>(stride));
    out.targets.push_back(rectify(static_cast<double>(l - end_row), r_early));
    out.units.push_back(unit);
    out.end_cycles.push_back(cycles.empty() ? static_cast<int>(end_row) : cycles[end_row - 1]);
  }
  return out;
}

std::optional<WindowedDataset> window_test(const Matrix& trajectory, std::size_t window,
                                           double true_rul, double r_early, int unit,
                                           int end_cycle) {
  if (window == 0) throw ConfigError("window size must be positive");
  if (trajectory.rows < window) return std::nullopt;
  WindowedDataset out;
  out.window = window;
  out.features = trajectory.cols;
  auto first = trajectory.data.end() - static_cast<std::ptrdiff_t>(window * trajectory.cols);
  out.samples.assign(first, trajectory.data.end());
  out.targets.push_back(rectify(true_rul, r_early));
  out.units.push_back(unit);
  out.end_cycles.push_back(end_cycle ? end_cycle : static_cast<int>(trajectory.rows));
  return out;
}

PreparedSubset prepare_subset(const SubsetFiles& files, const SubsetConfig& config) {
  if (files.test_rul.size() != files.test.size()) {
    throw DataError("test RUL count does not match test trajectory count");
  }
  PreparedSubset p;
  p.config = config;
  std::vector<Matrix> train;
  train.reserve(files.train.size());
  for (const auto& t : files.train) train.push_back(select_features(t, config));
  p.stats = fit_normalizer(train);

  p.train.window = p.test.window = config.window;
  p.train.features = p.test.features = config.features();
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& raw = files.train[i];
    if (raw.length() < config.window) {
      ++p.discarded_train;
      continue;
    }
    p.train.append(window_train(apply_normalizer(train[i], p.stats), config.window,
                                config.r_early, raw.unit, raw.cycles));
  }
  for (std::size_t i = 0; i < files.test.size(); ++i) {
    const auto& raw = files.test[i];
    auto w = window_test(apply_normalizer(select_features(raw, config), p.stats), config.window,
                         files.test_rul[i], config.r_early, raw.unit,
                         raw.cycles.empty() ? 0 : raw.cycles.back());
    if (!w) {
      ++p.discarded_test;
      logging::warn("test unit " + std::to_string(raw.unit) + " shorter than the window; discarded");
      continue;
    }
    p.test.append(*w);
  }
  if (p.train.size() == 0) throw DataError(config.name + ": no training windows");
  return p;
}

}  // namespace steinrul
