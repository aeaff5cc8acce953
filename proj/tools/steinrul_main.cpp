#include <CLI11.hpp>

#include <iostream>

#include "steinrul/error.hpp"
#include "steinrul/format.hpp"
#include "steinrul/logging.hpp"
#include "steinrul/runner.hpp"

namespace {

using namespace steinrul;

void apply_overrides(RunConfig& config, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
}

void print_summary(const RunReport& report) {
  for (const auto& [name, a] : report.aggregate) {
    std::cout << name << "\t" << format_double(a.mean) << "\t" << format_double(a.std) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian remaining-useful-life estimation on C-MAPSS"};
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "train and evaluate one subset/model/trainer over seeds");
  std::string config_file, subset, model, trainer, seeds, data_dir, out;
  std::vector<std::string> sets;
  bool quiet = false;
  int threads = 0;
  run_cmd->add_option("--config", config_file, "key=value file applied before other options")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--subset", subset, "FD001..FD004");
  run_cmd->add_option("--model", model, "d3 or c2p2");
  run_cmd->add_option("--trainer", trainer, "bp, bbb or svgd");
  run_cmd->add_option("--seeds", seeds, "e.g. 0..9, 3 or 0,2,5");
  run_cmd->add_option("--data-dir", data_dir, std::string("C-MAPSS directory (default $") + kDataDirEnv + ")");
  run_cmd->add_option("--out", out, "output directory");
  run_cmd->add_option("--set", sets, "override a setting, key=value (repeatable)");
  run_cmd->add_option("--threads", threads, "OpenMP threads (0 = runtime default)");
  run_cmd->add_flag("--quiet", quiet, "suppress progress output");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run the cross product of subsets, models and trainers");
  std::string sweep_file, sweep_out;
  std::vector<std::string> sweep_sets;
  sweep_cmd->add_option("--config", sweep_file, "sweep file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep_out, "output directory (overrides the file)");
  sweep_cmd->add_option("--set", sweep_sets, "override a setting, key=value (repeatable)");
  sweep_cmd->add_flag("--quiet", quiet, "suppress progress output");

  // emit-dist
  auto* dist_cmd = app.add_subcommand("emit-dist", "export weight and predictive samples for plotting");
  DistributionRequest request;
  std::string report_path, dist_data_dir, dist_out;
  std::uint64_t dist_seed = 0;
  dist_cmd->add_option("--run", report_path, "report.jsonl of a finished run")->required()->check(CLI::ExistingFile);
  dist_cmd->add_option("--weight-index", request.weight_index, "flat weight coordinate")->required();
  dist_cmd->add_option("--sample-index", request.sample_index, "test sample index")->required();
  auto* seed_opt = dist_cmd->add_option("--seed", dist_seed, "seed of the run (default: first)");
  dist_cmd->add_option("--data-dir", dist_data_dir, "C-MAPSS directory (default: the run's)");
  dist_cmd->add_option("--out", dist_out, "output JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed()) {
      RunConfig config;
      if (!config_file.empty()) {
        for (const auto& [k, v] : read_key_values(config_file)) apply_setting(config, k, v);
      }
      if (!subset.empty()) apply_setting(config, "subset", subset);
      if (!model.empty()) apply_setting(config, "model", model);
      if (!trainer.empty()) apply_setting(config, "trainer", trainer);
      if (!seeds.empty()) apply_setting(config, "seeds", seeds);
      if (!data_dir.empty()) config.data_dir = data_dir;
      if (!out.empty()) config.output_dir = out;
      apply_overrides(config, sets);
      if (threads > 0) config.threads = threads;
      if (quiet) config.quiet = true;
      print_summary(run(config));
      std::cout << "report\t" << (config.output_dir / "report.jsonl").string() << "\n";
    } else if (sweep_cmd->parsed()) {
      std::filesystem::path output_dir;
      auto configs = load_sweep_file(sweep_file, &output_dir);
      for (auto& c : configs) {
        apply_overrides(c, sweep_sets);
        if (quiet) c.quiet = true;
      }
      if (!sweep_out.empty()) output_dir = sweep_out;
      logging::set_quiet(quiet);
      const SweepReport report = sweep(configs, output_dir);
      std::cout << sweep_table(report);
      if (report.failures() > 0) {
        std::cerr << "error: " << report.failures() << " of " << report.cells.size()
                  << " sweep cells failed\n";
        return report.exit_code();
      }
    } else if (dist_cmd->parsed()) {
      request.report = report_path;
      if (*seed_opt) request.seed = dist_seed;
      request.data_dir = dist_data_dir;
      request.output = dist_out;
      std::cout << emit_distributions(request).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
