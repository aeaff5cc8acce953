#include "steinrul/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "steinrul/dataset_cache.hpp"
#include "steinrul/error.hpp"
#include "steinrul/format.hpp"
#include "steinrul/kernels.hpp"
#include "steinrul/logging.hpp"

namespace steinrul {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string to_string(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::kBackprop: return "bp";
    case TrainerKind::kBbb: return "bbb";
    case TrainerKind::kSvgd: return "svgd";
  }
  return "?";
}

TrainerKind parse_trainer_kind(const std::string& s) {
  if (s == "bp" || s == "backprop") return TrainerKind::kBackprop;
  if (s == "bbb") return TrainerKind::kBbb;
  if (s == "svgd") return TrainerKind::kSvgd;
  throw ConfigError("unknown trainer '" + s + "' (expected bp, bbb or svgd)");
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(value, &used));
    } else if constexpr (std::is_signed_v<T>) {
      out = static_cast<T>(std::stoll(value, &used));
    } else {
      if (!value.empty() && value.front() == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(value, &used));
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericError(what + " is not finite");
}

fs::path resolve_data_dir(const fs::path& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return fs::path(env);
  throw ConfigError(std::string("no data directory: pass --data-dir or set ") + kDataDirEnv);
}

ModelSpec model_spec_for(const RunConfig& config, const SubsetConfig& subset) {
  return ModelSpec{config.model, subset.window, subset.features(), config.train.dropout};
}

fs::path posterior_path(const fs::path& dir, std::uint64_t seed) {
  return dir / ("posterior_seed" + std::to_string(seed) + ".bin");
}

ojson metrics_json(const MetricTriple& m) {
  return ojson{{"rmse", m.rmse}, {"mae", m.mae}, {"score", m.score}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  subset_config(subset);
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!(correction_k > 0.0)) throw ConfigError("correction_k must be positive");
  if (eval_draws == 0) throw ConfigError("eval_draws must be positive");
  train.validate();
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_list(text)) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_number<std::uint64_t>("seeds", part));
      continue;
    }
    const auto lo = parse_number<std::uint64_t>("seeds", trim(part.substr(0, dots)));
    const auto hi = parse_number<std::uint64_t>("seeds", trim(part.substr(dots + 2)));
    if (hi < lo) throw ConfigError("seed range '" + part + "' is empty");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("seeds must not be empty");
  return out;
}

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  TrainConfig& t = c.train;
  if (key == "subset") {
    subset_config(value);
    c.subset = value;
  } else if (key == "model") {
    c.model = parse_model_kind(value);
  } else if (key == "trainer") {
    c.trainer = parse_trainer_kind(value);
  } else if (key == "seeds") {
    c.seeds = parse_seeds(value);
  } else if (key == "data_dir") {
    c.data_dir = value;
  } else if (key == "out" || key == "output_dir") {
    c.output_dir = value;
  } else if (key == "cache_dir") {
    c.cache_dir = value;
  } else if (key == "cache") {
    c.use_cache = parse_bool(key, value);
  } else if (key == "epochs") {
    t.epochs = parse_number<std::size_t>(key, value);
  } else if (key == "batch_size") {
    t.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "learning_rate" || key == "lr") {
    t.learning_rate = parse_number<double>(key, value);
  } else if (key == "decay_epoch") {
    t.decay_epoch = parse_number<std::size_t>(key, value);
  } else if (key == "decay_factor") {
    t.decay_factor = parse_number<double>(key, value);
  } else if (key == "huber_delta") {
    t.huber_delta = parse_number<double>(key, value);
  } else if (key == "mc_samples") {
    t.mc_samples = parse_number<std::size_t>(key, value);
  } else if (key == "particles") {
    t.particles = parse_number<std::size_t>(key, value);
  } else if (key == "prior_std") {
    t.prior_std = parse_number<double>(key, value);
  } else if (key == "rho_init") {
    t.rho_init = parse_number<double>(key, value);
  } else if (key == "dropout") {
    t.dropout = parse_number<double>(key, value);
  } else if (key == "correction_k") {
    c.correction_k = parse_number<double>(key, value);
  } else if (key == "eval_draws") {
    c.eval_draws = parse_number<std::size_t>(key, value);
  } else if (key == "threads") {
    c.threads = parse_number<int>(key, value);
  } else if (key == "quiet") {
    c.quiet = parse_bool(key, value);
  } else {
    throw ConfigError("unknown setting '" + raw_key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> read_key_values(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

ojson config_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  return ojson{
      {"subset", c.subset},
      {"model", to_string(c.model)},
      {"trainer", to_string(c.trainer)},
      {"seeds", c.seeds},
      {"data_dir", c.data_dir.string()},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"learning_rate", t.learning_rate},
      {"decay_epoch", t.decay_epoch},
      {"decay_factor", t.decay_factor},
      {"huber_delta", t.huber_delta},
      {"mc_samples", t.mc_samples},
      {"particles", t.particles},
      {"prior_std", t.prior_std},
      {"rho_init", t.rho_init},
      {"dropout", t.dropout},
      {"correction_k", c.correction_k},
      {"eval_draws", c.eval_draws},
  };
}

// ---------------------------------------------------------------------------
// Reports

Aggregate aggregate_of(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("aggregate of no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

std::vector<std::string> RunReport::jsonl() const {
  std::vector<std::string> lines;
  const ojson base{{"schema", kReportSchema},
                   {"toolkit_version", kToolkitVersion},
                   {"subset", config.subset},
                   {"model", to_string(config.model)},
                   {"trainer", to_string(config.trainer)}};
  for (const auto& s : seeds) {
    ojson rec{{"record", "seed"}};
    rec.update(base);
    rec["seed"] = s.seed;
    rec["test_samples"] = s.test_samples;
    rec["members"] = s.members;
    rec.update(metrics_json(s.raw));
    if (s.corrected) {
      rec["rmse_corrected"] = s.corrected->rmse;
      rec["mae_corrected"] = s.corrected->mae;
      rec["score_corrected"] = s.corrected->score;
    }
    if (s.p_late) rec["p_late"] = *s.p_late;
    lines.push_back(rec.dump());
  }
  ojson agg{{"record", "aggregate"}};
  agg.update(base);
  agg["seed_count"] = seeds.size();
  for (const auto& [name, a] : aggregate) {
    agg[name + "_mean"] = a.mean;
    agg[name + "_std"] = a.std;
  }
  agg["config"] = config_json(config);
  lines.push_back(agg.dump());
  return lines;
}

// ---------------------------------------------------------------------------
// Posterior files

namespace {
constexpr char kPosteriorMagic[8] = {'S', 'R', 'U', 'L', 'P', 'O', 'S', 'T'};
constexpr std::uint32_t kPosteriorVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
void put_vec(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}
template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("posterior file is truncated");
  return v;
}
std::vector<double> get_vec(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 34)) throw DataError("posterior file is corrupt");
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError("posterior file is truncated");
  return v;
}
}  // namespace

void save_posterior(const fs::path& file, const TrainedPosterior& p) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out.write(kPosteriorMagic, sizeof(kPosteriorMagic));
  put(out, kPosteriorVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.source));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.spec.kind));
  put<std::uint64_t>(out, p.spec.window);
  put<std::uint64_t>(out, p.spec.features);
  put(out, p.spec.dropout);
  switch (p.source) {
    case EnsembleSource::kSvgdParticles:
      put<std::uint64_t>(out, p.particles.rows);
      put<std::uint64_t>(out, p.particles.cols);
      put_vec(out, p.particles.data);
      break;
    case EnsembleSource::kBbbDraws:
      put_vec(out, p.surrogate.mu);
      put_vec(out, p.surrogate.rho);
      break;
    case EnsembleSource::kPointEstimate:
      put_vec(out, p.point.values);
      break;
  }
  if (!out) throw DataError("failed writing " + file.string());
}

TrainedPosterior load_posterior(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kPosteriorMagic)) {
    throw DataError(file.string() + " is not a posterior file");
  }
  if (get<std::uint32_t>(in) != kPosteriorVersion) throw DataError(file.string() + ": unsupported version");
  TrainedPosterior p;
  const auto source = get<std::uint32_t>(in);
  const auto kind = get<std::uint32_t>(in);
  if (source > 2 || kind > 1) throw DataError(file.string() + " is corrupt");
  p.source = static_cast<EnsembleSource>(source);
  p.spec.kind = static_cast<ModelKind>(kind);
  p.spec.window = get<std::uint64_t>(in);
  p.spec.features = get<std::uint64_t>(in);
  p.spec.dropout = get<double>(in);
  const std::size_t d = build_layout(p.spec).dimension();
  switch (p.source) {
    case EnsembleSource::kSvgdParticles: {
      p.particles.rows = get<std::uint64_t>(in);
      p.particles.cols = get<std::uint64_t>(in);
      p.particles.data = get_vec(in);
      if (p.particles.cols != d || p.particles.data.size() != p.particles.rows * d) {
        throw DataError(file.string() + ": particle block does not match the model");
      }
      break;
    }
    case EnsembleSource::kBbbDraws:
      p.surrogate.mu = get_vec(in);
      p.surrogate.rho = get_vec(in);
      if (p.surrogate.mu.size() != d || p.surrogate.rho.size() != d) {
        throw DataError(file.string() + ": surrogate does not match the model");
      }
      break;
    case EnsembleSource::kPointEstimate:
      p.point.values = get_vec(in);
      if (p.point.values.size() != d) throw DataError(file.string() + ": weights do not match the model");
      break;
  }
  return p;
}

PosteriorEnsemble make_ensemble(const TrainedPosterior& p, std::size_t eval_draws,
                                std::uint64_t seed) {
  switch (p.source) {
    case EnsembleSource::kSvgdParticles: return ensemble_from_particles(p.spec, p.particles);
    case EnsembleSource::kBbbDraws: return ensemble_from_surrogate(p.spec, p.surrogate, eval_draws, seed);
    case EnsembleSource::kPointEstimate: return ensemble_from_point(ModelInstance(p.spec, p.point));
  }
  throw ConfigError("unknown ensemble source");
}

// ---------------------------------------------------------------------------
// run

RunReport run(const RunConfig& input) {
  RunConfig config = input;
  config.validate();
  config.data_dir = resolve_data_dir(config.data_dir);
  if (config.output_dir.empty()) throw ConfigError("no output directory (--out)");
  if (config.threads > 0) kernels::set_num_threads(config.threads);
  logging::set_quiet(config.quiet);
  fs::create_directories(config.output_dir);

  const SubsetConfig subset = subset_config(config.subset);
  const auto prep_start = std::chrono::steady_clock::now();
  const fs::path cache_dir =
      !config.use_cache ? fs::path{} : (config.cache_dir.empty() ? config.output_dir / "cache" : config.cache_dir);
  bool cache_hit = false;
  const PreparedSubset data = load_or_prepare(config.data_dir, cache_dir, subset, &cache_hit);
  const double prep_seconds = seconds_since(prep_start);
  if (data.test.size() == 0) throw DataError(subset.name + ": no test windows");
  logging::info(subset.name + ": " + std::to_string(data.train.size()) + " training windows, " +
            std::to_string(data.test.size()) + " test windows" + (cache_hit ? " (cached)" : ""));

  const Tensor train_x = data.train.sample_tensor();
  const Tensor test_x = data.test.sample_tensor();
  const ModelSpec spec = model_spec_for(config, subset);

  RunReport report;
  report.config = config;
  std::ofstream timings(config.output_dir / "timings.jsonl", std::ios::trunc);

  for (const auto seed : config.seeds) {
    SeedResult r;
    r.seed = seed;
    r.preprocess_seconds = prep_seconds;
    TrainConfig tc = config.train;
    tc.seed = seed;
    const std::string tag = subset.name + "/" + to_string(config.model) + "-" +
                            to_string(config.trainer) + " seed " + std::to_string(seed);
    tc.on_epoch = [&](std::size_t epoch, double loss) {
      logging::info(tag + " epoch " + std::to_string(epoch + 1) + "/" + std::to_string(tc.epochs) +
                " loss " + format_double(loss));
    };

    const auto train_start = std::chrono::steady_clock::now();
    TrainedPosterior posterior;
    posterior.spec = spec;
    switch (config.trainer) {
      case TrainerKind::kBackprop:
        posterior.source = EnsembleSource::kPointEstimate;
        posterior.point = train_backprop(spec, train_x, data.train.targets, tc).params();
        break;
      case TrainerKind::kBbb:
        posterior.source = EnsembleSource::kBbbDraws;
        posterior.surrogate = train_bbb(spec, train_x, data.train.targets, tc);
        break;
      case TrainerKind::kSvgd:
        posterior.source = EnsembleSource::kSvgdParticles;
        posterior.particles = train_svgd(spec, train_x, data.train.targets, tc);
        break;
    }
    r.train_seconds = seconds_since(train_start);
    save_posterior(posterior_path(config.output_dir, seed), posterior);

    const auto eval_start = std::chrono::steady_clock::now();
    const PosteriorEnsemble ensemble = make_ensemble(posterior, config.eval_draws, seed);
    PredictiveSummary summary = predictive_summary(ensemble, test_x);
    r.members = ensemble.size();
    r.test_samples = summary.size();
    r.raw = evaluate(summary.mean, data.test.targets);
    if (config.trainer != TrainerKind::kBackprop) {
      const auto rate = estimate_p_late(ensemble, train_x, data.train.targets);
      r.p_late = rate.p_late;
      correct(summary, rate.p_late, config.correction_k);
      r.corrected = evaluate(summary.corrected, data.test.targets);
    }
    r.evaluate_seconds = seconds_since(eval_start);

    require_finite(r.raw.rmse, tag + " rmse");
    require_finite(r.raw.mae, tag + " mae");
    require_finite(r.raw.score, tag + " score");
    if (r.corrected) {
      require_finite(r.corrected->rmse, tag + " corrected rmse");
      require_finite(r.corrected->mae, tag + " corrected mae");
      require_finite(r.corrected->score, tag + " corrected score");
    }

    std::ofstream table(config.output_dir / ("predictions_seed" + std::to_string(seed) + ".tsv"),
                        std::ios::trunc);
    write_prediction_table(table, summary, data.test.units, data.test.targets);
    timings << ojson{{"seed", seed},
                     {"preprocess_seconds", r.preprocess_seconds},
                     {"train_seconds", r.train_seconds},
                     {"evaluate_seconds", r.evaluate_seconds},
                     {"cache_hit", cache_hit}}
                   .dump()
            << '\n';
    logging::info(tag + ": rmse " + format_double(r.raw.rmse) + " score " + format_double(r.raw.score));
    report.seeds.push_back(std::move(r));
  }

  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const auto& s : report.seeds) v.push_back(getter(s));
    return aggregate_of(v);
  };
  report.aggregate["rmse"] = collect([](const SeedResult& s) { return s.raw.rmse; });
  report.aggregate["mae"] = collect([](const SeedResult& s) { return s.raw.mae; });
  report.aggregate["score"] = collect([](const SeedResult& s) { return s.raw.score; });
  if (config.trainer != TrainerKind::kBackprop) {
    report.aggregate["rmse_corrected"] = collect([](const SeedResult& s) { return s.corrected->rmse; });
    report.aggregate["mae_corrected"] = collect([](const SeedResult& s) { return s.corrected->mae; });
    report.aggregate["score_corrected"] = collect([](const SeedResult& s) { return s.corrected->score; });
    report.aggregate["p_late"] = collect([](const SeedResult& s) { return *s.p_late; });
  }

  std::ofstream out(config.output_dir / "report.jsonl", std::ios::trunc);
  for (const auto& line : report.jsonl()) out << line << '\n';
  if (!out) throw DataError("failed writing report to " + config.output_dir.string());
  return report;
}

// ---------------------------------------------------------------------------
// sweep

std::size_t SweepReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return !c.report; }));
}

int SweepReport::exit_code() const {
  for (const auto& c : cells)
    if (!c.report) return c.exit_code;
  return 0;
}

std::vector<RunConfig> expand_sweep(const RunConfig& base, const std::vector<std::string>& subsets,
                                    const std::vector<ModelKind>& models,
                                    const std::vector<TrainerKind>& trainers) {
  std::vector<RunConfig> out;
  for (const auto& s : subsets)
    for (auto m : models)
      for (auto t : trainers) {
        RunConfig c = base;
        c.subset = s;
        c.model = m;
        c.trainer = t;
        out.push_back(std::move(c));
      }
  return out;
}

SweepReport sweep(const std::vector<RunConfig>& configs, const fs::path& output_dir) {
  if (configs.empty()) throw UsageError("sweep needs at least one configuration");
  if (output_dir.empty()) throw ConfigError("sweep needs an output directory");
  fs::create_directories(output_dir);
  SweepReport report;
  std::ofstream records(output_dir / "sweep.jsonl", std::ios::trunc);
  for (const auto& base : configs) {
    SweepCell cell{base.subset, base.model, base.trainer, std::nullopt, {}};
    RunConfig c = base;
    c.output_dir = output_dir / (c.subset + "_" + to_string(c.model) + "_" + to_string(c.trainer));
    if (c.use_cache && c.cache_dir.empty()) c.cache_dir = output_dir / "cache";
    try {
      cell.report = run(c);
      records << cell.report->jsonl().back() << '\n';
    } catch (const std::exception& e) {
      cell.error = e.what();
      cell.exit_code = exit_code_for(e);
      logging::warn("sweep cell " + c.output_dir.filename().string() + " failed: " + cell.error);
      records << ojson{{"record", "error"},
                       {"subset", cell.subset},
                       {"model", to_string(cell.model)},
                       {"trainer", to_string(cell.trainer)},
                       {"error", cell.error}}
                     .dump()
              << '\n';
    }
    report.cells.push_back(std::move(cell));
  }
  std::ofstream table(output_dir / "table.tsv", std::ios::trunc);
  table << sweep_table(report);
  return report;
}

std::vector<RunConfig> load_sweep_file(const fs::path& file, fs::path* output_dir) {
  RunConfig base;
  std::vector<std::string> subsets{"FD001"};
  std::vector<ModelKind> models{ModelKind::kDense3};
  std::vector<TrainerKind> trainers{TrainerKind::kSvgd};
  for (const auto& [key, value] : read_key_values(file)) {
    if (key == "subsets") {
      subsets = split_list(value);
      for (const auto& s : subsets) subset_config(s);
    } else if (key == "models") {
      models.clear();
      for (const auto& m : split_list(value)) models.push_back(parse_model_kind(m));
    } else if (key == "trainers") {
      trainers.clear();
      for (const auto& t : split_list(value)) trainers.push_back(parse_trainer_kind(t));
    } else {
      apply_setting(base, key, value);
    }
  }
  if (output_dir) *output_dir = base.output_dir;
  return expand_sweep(base, subsets, models, trainers);
}

std::string sweep_table(const SweepReport& report) {
  // Columns in order of first appearance.
  std::vector<std::string> columns;
  std::vector<std::string> subsets;
  for (const auto& c : report.cells) {
    const std::string col = to_string(c.model) + "-" + to_string(c.trainer);
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    if (std::find(subsets.begin(), subsets.end(), c.subset) == subsets.end()) subsets.push_back(c.subset);
  }
  std::ostringstream out;
  out << "subset\tmetric";
  for (const auto& col : columns) out << '\t' << col << " mean\t" << col << " std";
  out << '\n';
  const std::vector<std::pair<std::string, std::string>> metrics{
      {"RMSE", "rmse"}, {"MAE", "mae"}, {"Score", "score"},
      {"RMSE*", "rmse_corrected"}, {"MAE*", "mae_corrected"}, {"Score*", "score_corrected"}};
  for (const auto& subset : subsets) {
    for (const auto& [label, key] : metrics) {
      out << subset << '\t' << label;
      for (const auto& col : columns) {
        const SweepCell* cell = nullptr;
        for (const auto& c : report.cells) {
          if (c.subset == subset && to_string(c.model) + "-" + to_string(c.trainer) == col) cell = &c;
        }
        if (!cell || !cell->report) {
          out << (cell ? "\terror\terror" : "\t-\t-");
          continue;
        }
        const auto it = cell->report->aggregate.find(key);
        if (it == cell->report->aggregate.end()) {
          out << "\t-\t-";
        } else {
          out << '\t' << format_double(it->second.mean) << '\t' << format_double(it->second.std);
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// emit-dist

ojson emit_distributions(const DistributionRequest& request) {
  std::ifstream in(request.report);
  if (!in) throw DataError("cannot open report " + request.report.string());
  ojson aggregate;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = ojson::parse(line, nullptr, false);
    if (rec.is_discarded()) throw DataError(request.report.string() + " is not a JSON-lines report");
    if (rec.value("record", "") == "aggregate") aggregate = std::move(rec);
  }
  if (aggregate.is_null()) throw DataError(request.report.string() + " has no aggregate record");
  const ojson& cfg = aggregate.at("config");

  RunConfig config;
  config.subset = cfg.at("subset").get<std::string>();
  config.model = parse_model_kind(cfg.at("model").get<std::string>());
  config.trainer = parse_trainer_kind(cfg.at("trainer").get<std::string>());
  config.seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
  config.eval_draws = cfg.at("eval_draws").get<std::size_t>();
  config.train.prior_std = cfg.at("prior_std").get<double>();
  const std::uint64_t seed = request.seed.value_or(config.seeds.front());
  if (std::find(config.seeds.begin(), config.seeds.end(), seed) == config.seeds.end()) {
    throw ConfigError("seed " + std::to_string(seed) + " is not part of this run");
  }

  const fs::path run_dir = request.report.parent_path();
  const TrainedPosterior posterior = load_posterior(posterior_path(run_dir, seed));
  const PosteriorEnsemble ensemble = make_ensemble(posterior, config.eval_draws, seed);
  if (request.weight_index >= ensemble.layout.dimension()) {
    throw ConfigError("weight index " + std::to_string(request.weight_index) + " out of range (D = " +
                      std::to_string(ensemble.layout.dimension()) + ")");
  }

  const fs::path data_dir =
      resolve_data_dir(request.data_dir.empty() ? fs::path(cfg.at("data_dir").get<std::string>())
                                                : request.data_dir);
  const SubsetConfig subset = subset_config(config.subset);
  const PreparedSubset data = load_or_prepare(data_dir, run_dir / "cache", subset);
  if (request.sample_index >= data.test.size()) {
    throw ConfigError("sample index " + std::to_string(request.sample_index) + " out of range (" +
                      std::to_string(data.test.size()) + " test samples)");
  }
  const std::size_t stride = subset.window * subset.features();
  const auto first = data.test.samples.begin() + static_cast<std::ptrdiff_t>(request.sample_index * stride);
  const Tensor sample({1, subset.window, subset.features()},
                      std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride)));
  const PredictiveSummary summary = predictive_summary(ensemble, sample);

  std::string weight_name;
  for (const auto& e : ensemble.layout.entries()) {
    if (request.weight_index >= e.offset && request.weight_index < e.offset + e.size()) {
      weight_name = e.name + "[" + std::to_string(request.weight_index - e.offset) + "]";
    }
  }
  std::vector<double> weights, predictions;
  for (std::size_t m = 0; m < ensemble.size(); ++m) {
    weights.push_back(ensemble.members[m].values[request.weight_index]);
    predictions.push_back(summary.member_predictions(0, m));
  }

  ojson out{{"schema", kReportSchema},
            {"source", to_string(ensemble.source)},
            {"point_estimate", ensemble.source == EnsembleSource::kPointEstimate},
            {"subset", config.subset},
            {"model", to_string(config.model)},
            {"trainer", to_string(config.trainer)},
            {"seed", seed},
            {"weight_index", request.weight_index},
            {"weight_name", weight_name},
            {"sample_index", request.sample_index},
            {"unit_id", data.test.units[request.sample_index]},
            {"true_rul", data.test.targets[request.sample_index]}};
  if (ensemble.source == EnsembleSource::kPointEstimate) {
    out["prior"] = nullptr;
  } else {
    out["prior"] = ojson{{"mean", 0.0}, {"std", config.train.prior_std}};
  }
  if (ensemble.source == EnsembleSource::kBbbDraws) {
    out["surrogate"] = ojson{{"mean", posterior.surrogate.mu[request.weight_index]},
                             {"std", softplus(posterior.surrogate.rho[request.weight_index])}};
  }
  out["weights"] = weights;
  out["predictions"] = predictions;
  out["predictive_mean"] = summary.mean[0];
  out["predictive_std"] = summary.stddev[0];

  const fs::path target = request.output.empty()
                              ? run_dir / ("dist_seed" + std::to_string(seed) + "_w" +
                                           std::to_string(request.weight_index) + "_x" +
                                           std::to_string(request.sample_index) + ".json")
                              : request.output;
  std::ofstream file(target, std::ios::trunc);
  if (!file) throw DataError("cannot write " + target.string());
  file << out.dump(2) << '\n';
  return out;
}

}  // namespace steinrul
