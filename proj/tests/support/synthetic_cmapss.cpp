#include "synthetic_cmapss.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unistd.h>

namespace steinrul::testing {
namespace fs = std::filesystem;

namespace {

struct Unit {
  int length = 0;
  std::array<double, 21> base{};
};

void write_rows(std::ofstream& out, int unit, const Unit& u, int rows, std::mt19937_64& rng, double noise) {
  std::normal_distribution<double> eps(0.0, noise);
  out.precision(6);
  out << std::fixed;
  for (int t = 1; t <= rows; ++t) {
    const double health = std::pow(static_cast<double>(t) / u.length, 2.0);
    out << unit << ' ' << t;
    out << ' ' << 0.0 + eps(rng) * 0.01 << ' ' << 0.0 + eps(rng) * 0.01 << ' ' << 100.0;
    for (int s = 0; s < 21; ++s) {
      const double gain = (s % 3 == 0 ? -1.0 : 1.0) * (0.5 + 0.1 * s);
      out << ' ' << u.base[s] + gain * health + eps(rng);
    }
    out << '\n';
  }
}

}  // namespace

void write_synthetic_subset(const fs::path& dir, const SyntheticSubset& spec) {
  fs::create_directories(dir);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> length(spec.min_length, spec.max_length);
  auto make_unit = [&] {
    Unit u;
    u.length = length(rng);
    std::normal_distribution<double> offset(0.0, 0.05);
    for (int s = 0; s < 21; ++s) u.base[s] = 10.0 * (s + 1) + offset(rng);
    return u;
  };

  std::ofstream train(dir / ("train_" + spec.name + ".txt"));
  std::mt19937_64 noise_rng(spec.seed ^ 0x5bd1e995ULL);
  for (int i = 1; i <= spec.train_units; ++i) {
    const Unit u = make_unit();
    write_rows(train, i, u, u.length, noise_rng, spec.noise);
  }

  std::ofstream test(dir / ("test_" + spec.name + ".txt"));
  std::ofstream rul(dir / ("RUL_" + spec.name + ".txt"));
  for (int i = 1; i <= spec.test_units; ++i) {
    const Unit u = make_unit();
    std::uniform_int_distribution<int> cut(std::min(spec.min_test_length, u.length), u.length);
    const int rows = cut(rng);
    write_rows(test, i, u, rows, noise_rng, spec.noise);
    rul << (u.length - rows) << '\n';
  }
  if (!train || !test || !rul) throw std::runtime_error("failed writing synthetic subset");
}

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (prefix + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace steinrul::testing
