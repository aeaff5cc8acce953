#include <doctest.h>

#include <fstream>
#include <random>

#include "steinrul/error.hpp"
#include "steinrul/data.hpp"
#include "synthetic_cmapss.hpp"

using namespace steinrul;
using namespace steinrul::testing;
namespace fs = std::filesystem;

namespace {

Matrix ramp(std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = static_cast<double>(r * 100 + c);
  return m;
}

void write_lines(const fs::path& file, const std::vector<std::string>& lines) {
  std::ofstream out(file);
  for (const auto& l : lines) out << l << '\n';
}

std::string row(int unit, int cycle, double fill = 1.0, int fields = 26) {
  std::string s = std::to_string(unit) + " " + std::to_string(cycle);
  for (int i = 2; i < fields; ++i) s += " " + std::to_string(fill + i);
  return s;
}

}  // namespace

TEST_CASE("rectification") {
  CHECK(rectify(150, 125) == 125);
  CHECK(rectify(125, 125) == 125);
  CHECK(rectify(0, 125) == 0);
  CHECK(rectify(17.5, 125) == 17.5);
  CHECK_THROWS_AS(rectify(-1, 125), DataError);
}

TEST_CASE("subset configurations follow the preprocessing table") {
  const std::tuple<const char*, std::size_t, std::size_t> expected[] = {
      {"FD001", 30, 14}, {"FD002", 20, 24}, {"FD003", 30, 14}, {"FD004", 15, 24}};
  for (const auto& [name, t, f] : expected) {
    const SubsetConfig c = subset_config(name);
    CHECK(c.window == t);
    CHECK(c.features() == f);
    CHECK(c.r_early == 125.0);
  }
  CHECK(subset_config("FD001").train_samples == 17731);
  CHECK(subset_config("FD002").train_samples == 48819);
  CHECK(subset_config("FD003").train_samples == 21820);
  CHECK(subset_config("FD004").train_samples == 57763);
  CHECK(subset_config("FD002").test_samples == 259);
  CHECK(subset_config("FD004").test_trajectories == 248);
  CHECK(subset_config("FD004").train_trajectories == 249);
  CHECK_THROWS_AS(subset_config("FD005"), ConfigError);
  CHECK(subset_names().size() == 4);
}

TEST_CASE("feature selection keeps the listed sensors in order") {
  RawTrajectory t;
  t.unit = 1;
  t.cycles = {1, 2};
  t.features = ramp(2, kAllFeatures);  // column c holds value c on the first row
  const Matrix reduced = select_features(t, subset_config("FD001"));
  const int sensors[] = {2, 3, 4, 7, 8, 9, 11, 12, 13, 14, 15, 17, 20, 21};
  REQUIRE(reduced.cols == 14);
  for (std::size_t i = 0; i < 14; ++i) CHECK(reduced(0, i) == 3 + sensors[i] - 1);

  const Matrix all = select_features(t, subset_config("FD004"));
  REQUIRE(all.cols == 24);
  for (std::size_t i = 0; i < 24; ++i) CHECK(all(1, i) == 100.0 + static_cast<double>(i));
}

TEST_CASE("min-max normalization endpoints and round trip") {
  Matrix a(3, 2);
  a.data = {0, 10, 4, 20, 2, 30};
  const NormStats s = fit_normalizer({a});
  const Matrix n = apply_normalizer(a, s);
  CHECK(n(0, 0) == -1.0);
  CHECK(n(1, 0) == 1.0);
  CHECK(n(2, 0) == 0.0);
  CHECK(n(1, 1) == 0.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-500, 500);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Matrix> train(3, Matrix(20, 5));
    for (auto& m : train)
      for (auto& v : m.data) v = u(rng);
    const NormStats st = fit_normalizer(train);
    for (const auto& m : train) {
      const Matrix nm = apply_normalizer(m, st);
      for (double v : nm.data) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
      const Matrix back = denormalize(nm, st);
      for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(std::abs(back.data[i] - m.data[i]) < 1e-12);
    }
  }
}

TEST_CASE("test values outside the training range are not clipped") {
  Matrix a(2, 1);
  a.data = {0, 10};
  const NormStats s = fit_normalizer({a});
  Matrix t(1, 1);
  t.data = {20};
  CHECK(apply_normalizer(t, s)(0, 0) == 3.0);
}

TEST_CASE("a constant feature maps to zero") {
  Matrix a(3, 2);
  a.data = {5, 1, 5, 2, 5, 3};
  const NormStats s = fit_normalizer({a});
  const Matrix n = apply_normalizer(a, s);
  for (std::size_t r = 0; r < 3; ++r) CHECK(n(r, 0) == 0.0);
}

TEST_CASE("training windows") {
  CHECK(window_train(ramp(192, 14), 30, 125).size() == 163);
  CHECK(window_train(ramp(29, 14), 30, 125).size() == 0);
  CHECK(window_train(ramp(30, 14), 30, 125).size() == 1);

  const std::size_t l = 200, t = 30, f = 3;
  const WindowedDataset w = window_train(ramp(l, f), t, 125, 7);
  REQUIRE(w.size() == l - t + 1);
  CHECK(w.targets.back() == 0.0);
  CHECK(w.targets.front() == 125.0);  // raw 170 rectified
  for (std::size_t s = 0; s < w.size(); ++s) {
    CHECK(w.targets[s] >= 0.0);
    CHECK(w.targets[s] <= 125.0);
    CHECK(w.targets[s] == std::min(125.0, static_cast<double>(l - (s + t))));
    CHECK(w.units[s] == 7);
    CHECK(w.end_cycles[s] == static_cast<int>(s + t));
  }
  // Consecutive windows share T-1 rows.
  const std::size_t stride = t * f;
  for (std::size_t s = 0; s + 1 < w.size(); ++s) {
    const auto* a = w.samples.data() + s * stride;
    const auto* b = w.samples.data() + (s + 1) * stride;
    CHECK(std::equal(a + f, a + stride, b));
  }
}

TEST_CASE("test windows") {
  const auto whole = window_test(ramp(30, 2), 30, 150, 125);
  REQUIRE(whole);
  CHECK(whole->targets[0] == 125.0);
  CHECK(whole->samples == ramp(30, 2).data);

  const auto last = window_test(ramp(40, 2), 30, 12, 125);
  REQUIRE(last);
  CHECK(last->samples.front() == 1000.0);  // row 10
  CHECK(last->targets[0] == 12.0);
  CHECK_FALSE(window_test(ramp(29, 2), 30, 5, 125));
}

TEST_CASE("parse errors carry the file and line") {
  TempDir dir("steinrul_parse");
  const fs::path f = dir.path() / "train_FD001.txt";
  write_lines(f, {row(1, 1), row(1, 2, 1.0, 25)});
  try {
    parse_trajectories(f);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("train_FD001.txt") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(e.line() == 2);
  }

  write_lines(f, {row(1, 1), row(1, 3), row(1, 2)});
  CHECK_THROWS_AS(parse_trajectories(f), ParseError);
  write_lines(f, {row(1, 2)});
  CHECK_THROWS_AS(parse_trajectories(f), ParseError);
  write_lines(f, {row(1, 1), row(2, 1), row(1, 2)});
  CHECK_THROWS_AS(parse_trajectories(f), ParseError);
  write_lines(f, {row(1, 1) + " x"});
  CHECK_THROWS_AS(parse_trajectories(f), ParseError);
  write_lines(f, {"1 1 abc" + row(1, 1).substr(3)});
  CHECK_THROWS_AS(parse_trajectories(f), ParseError);
  CHECK_THROWS_AS(parse_trajectories(dir.path() / "missing.txt"), DataError);
}

TEST_CASE("parsing tolerates trailing whitespace and blank lines") {
  TempDir dir("steinrul_parse_ws");
  const fs::path f = dir.path() / "t.txt";
  write_lines(f, {row(1, 1) + "  ", "", row(1, 2) + " \t", row(2, 1), ""});
  const auto t = parse_trajectories(f);
  REQUIRE(t.size() == 2);
  CHECK(t[0].length() == 2);
  CHECK(t[0].features(1, 0) == doctest::Approx(3.0));
  CHECK(t[1].unit == 2);

  const fs::path r = dir.path() / "rul.txt";
  write_lines(r, {"112 ", "98", ""});
  CHECK(parse_rul(r) == std::vector<double>{112, 98});
}

TEST_CASE("load and prepare a synthetic subset") {
  TempDir dir("steinrul_data");
  SyntheticSubset spec;
  write_synthetic_subset(dir.path(), spec);
  const SubsetFiles files = load_subset(dir.path(), "FD001");
  CHECK(files.train.size() == 12);
  CHECK(files.test.size() == 6);
  CHECK(files.test_rul.size() == 6);

  const SubsetConfig config = subset_config("FD001");
  const PreparedSubset p = prepare_subset(files, config);
  std::size_t expected = 0;
  for (const auto& t : files.train) expected += t.length() >= 30 ? t.length() - 30 + 1 : 0;
  CHECK(p.train.size() == expected);
  CHECK(p.test.size() + p.discarded_test == 6);
  for (double v : p.train.samples) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK(p.train.sample_tensor().shape() == Shape{expected, 30, 14});
}

TEST_CASE("normalization statistics never depend on test data") {
  TempDir dir("steinrul_leak");
  write_synthetic_subset(dir.path(), SyntheticSubset{});
  SubsetFiles files = load_subset(dir.path(), "FD001");
  const SubsetConfig config = subset_config("FD001");
  const PreparedSubset a = prepare_subset(files, config);
  for (auto& t : files.test)
    for (auto& v : t.features.data) v = v * 10.0 + 1000.0;
  const PreparedSubset b = prepare_subset(files, config);
  CHECK(a.stats == b.stats);
  CHECK(a.train == b.train);
  CHECK_FALSE(a.test == b.test);
}

TEST_CASE("short test trajectories are discarded") {
  TempDir dir("steinrul_short");
  SyntheticSubset spec;
  spec.min_test_length = 5;
  spec.test_units = 30;
  write_synthetic_subset(dir.path(), spec);
  const PreparedSubset p = prepare_subset(load_subset(dir.path(), "FD001"), subset_config("FD001"));
  CHECK(p.discarded_test > 0);
  CHECK(p.test.size() + p.discarded_test == 30);
}

TEST_CASE("missing files and count mismatches are data errors") {
  TempDir dir("steinrul_missing");
  CHECK_THROWS_AS(load_subset(dir.path(), "FD001"), DataError);
  write_synthetic_subset(dir.path(), SyntheticSubset{});
  write_lines(dir.path() / "RUL_FD001.txt", {"1", "2"});
  CHECK_THROWS_AS(load_subset(dir.path(), "FD001"), DataError);
}
