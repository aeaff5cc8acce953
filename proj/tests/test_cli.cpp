#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "steinrul/runner.hpp"
#include "synthetic_cmapss.hpp"

using namespace steinrul;
using namespace steinrul::testing;
namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("STEINRUL_CLI");
  REQUIRE_MESSAGE(p != nullptr, "STEINRUL_CLI must point at the steinrul executable");
  return p;
}

int exec(const std::string& args, const fs::path& log) {
  const std::string cmd = cli() + " " + args + " >" + (log.string() + ".out") + " 2>" + (log.string() + ".err");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kTiny = " --seeds 0 --quiet --set epochs=1 --set decay_epoch=1 --set batch_size=256"
                    " --set particles=2 --set mc_samples=2 --set eval_draws=3";

struct Fixture {
  TempDir dir{"steinrul_cli"};
  fs::path data = dir.path() / "data";
  Fixture() { write_synthetic_subset(data, SyntheticSubset{}); }
};

}  // namespace

TEST_CASE("run succeeds and writes a report") {
  Fixture fx;
  const fs::path out = fx.dir.path() / "run";
  CHECK(exec("run --trainer svgd --data-dir " + fx.data.string() + " --out " + out.string() + kTiny,
             fx.dir.path() / "log") == 0);
  CHECK(fs::exists(out / "report.jsonl"));
  CHECK(slurp(fx.dir.path() / "log.out").find("rmse\t") != std::string::npos);
}

TEST_CASE("the data directory can come from the environment") {
  Fixture fx;
  ::setenv(kDataDirEnv, fx.data.c_str(), 1);
  const fs::path out = fx.dir.path() / "env";
  const int code = exec("run --trainer bp --out " + out.string() + kTiny, fx.dir.path() / "log");
  ::unsetenv(kDataDirEnv);
  CHECK(code == 0);
  CHECK(fs::exists(out / "report.jsonl"));
}

TEST_CASE("config files with command-line overrides") {
  Fixture fx;
  const fs::path cfg = fx.dir.path() / "run.cfg";
  std::ofstream(cfg) << "trainer = bbb\nepochs = 1\ndecay_epoch = 1\nseeds = 0\nmc_samples = 2\neval_draws = 3\n"
                     << "data_dir = " << fx.data.string() << "\n";
  const fs::path out = fx.dir.path() / "cfg";
  CHECK(exec("run --config " + cfg.string() + " --trainer bp --quiet --out " + out.string(),
             fx.dir.path() / "log") == 0);
  const auto agg = nlohmann::json::parse(slurp(out / "report.jsonl").substr(slurp(out / "report.jsonl").rfind("{\"record\"")));
  CHECK(agg["trainer"] == "bp");
  CHECK(agg["config"]["epochs"] == 1);
}

TEST_CASE("exit codes") {
  Fixture fx;
  const std::string base = " --data-dir " + fx.data.string() + " --out " + (fx.dir.path() / "x").string();
  CHECK(exec("run --trainer mcmc" + base, fx.dir.path() / "log") == 1);
  CHECK(slurp(fx.dir.path() / "log.err").find("unknown trainer") != std::string::npos);
  CHECK(exec("run --set nonsense=1" + base, fx.dir.path() / "log") == 1);
  CHECK(exec("run --model c2p2 --subset FD001 --set epochs=0" + base, fx.dir.path() / "log") == 1);
  CHECK(exec("bogus", fx.dir.path() / "log") == 1);
  CHECK(exec("run --data-dir " + (fx.dir.path() / "nowhere").string() + " --out " +
                 (fx.dir.path() / "y").string() + kTiny,
             fx.dir.path() / "log") == 2);
  CHECK(exec("run --trainer bp" + base + kTiny + " --set learning_rate=1e200 --set epochs=2",
             fx.dir.path() / "log") == 3);
}

TEST_CASE("sweep and emit-dist") {
  Fixture fx;
  const fs::path cfg = fx.dir.path() / "sweep.cfg";
  std::ofstream(cfg) << "subsets = FD001\nmodels = d3\ntrainers = bp, svgd\nseeds = 0\nepochs = 1\n"
                     << "decay_epoch = 1\nparticles = 2\nquiet = on\ndata_dir = " << fx.data.string()
                     << "\nout = " << (fx.dir.path() / "sweep").string() << "\n";
  CHECK(exec("sweep --config " + cfg.string(), fx.dir.path() / "log") == 0);
  CHECK(slurp(fx.dir.path() / "log.out").find("FD001\tRMSE\t") != std::string::npos);
  const fs::path report = fx.dir.path() / "sweep" / "FD001_d3_svgd" / "report.jsonl";
  REQUIRE(fs::exists(report));

  const fs::path dist = fx.dir.path() / "dist.json";
  CHECK(exec("emit-dist --run " + report.string() + " --weight-index 5 --sample-index 0 --out " + dist.string(),
             fx.dir.path() / "log") == 0);
  const auto j = nlohmann::json::parse(slurp(dist));
  CHECK(j["weights"].size() == 2);
  CHECK(j["weight_index"] == 5);
  CHECK(exec("emit-dist --run " + report.string() + " --weight-index 99999999 --sample-index 0",
             fx.dir.path() / "log") == 1);
}

TEST_CASE("a sweep with a failing cell exits non-zero after finishing the others") {
  Fixture fx;
  const fs::path cfg = fx.dir.path() / "sweep.cfg";
  std::ofstream(cfg) << "subsets = FD001, FD003\nmodels = d3\ntrainers = bp\nseeds = 0\nepochs = 1\n"
                     << "decay_epoch = 1\nquiet = on\ndata_dir = " << fx.data.string()
                     << "\nout = " << (fx.dir.path() / "sweep").string() << "\n";
  CHECK(exec("sweep --config " + cfg.string(), fx.dir.path() / "log") == 2);
  CHECK(fs::exists(fx.dir.path() / "sweep" / "FD001_d3_bp" / "report.jsonl"));
}
