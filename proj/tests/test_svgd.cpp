#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "steinrul/error.hpp"
#include "steinrul/trainers.hpp"

using namespace steinrul;
using namespace steinrul::testing;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (auto& v : m.data) v = n(rng);
  return m;
}

// Direct double loop over the update rule, sharing no code with the library.
Matrix brute_force_direction(const Matrix& w, const Matrix& g) {
  const std::size_t m = w.rows, d = w.cols;
  std::vector<double> dists;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (w(i, k) - w(j, k)) * (w(i, k) - w(j, k));
      dists.push_back(std::sqrt(s));
    }
  std::sort(dists.begin(), dists.end());
  const std::size_t p = dists.size();
  const double med = p % 2 ? dists[p / 2] : 0.5 * (dists[p / 2 - 1] + dists[p / 2]);
  const double h = med * med / std::log(static_cast<double>(m) + 1.0);
  Matrix phi(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (w(j, k) - w(i, k)) * (w(j, k) - w(i, k));
      const double kji = std::exp(-s / h);
      for (std::size_t k = 0; k < d; ++k) {
        phi(i, k) += kji * g(j, k) - (2.0 / h) * (w(j, k) - w(i, k)) * kji;
      }
    }
    for (std::size_t k = 0; k < d; ++k) phi(i, k) /= static_cast<double>(m);
  }
  return phi;
}

}  // namespace

TEST_CASE("two particles at distance 2") {
  Matrix w(2, 2);
  w(1, 0) = 2.0;
  const RbfKernel k = rbf_kernel(w);
  CHECK(k.median == 2.0);
  CHECK(k.bandwidth == doctest::Approx(4.0 / std::log(3.0)).epsilon(1e-15));
  CHECK(k.bandwidth == doctest::Approx(3.6410).epsilon(1e-4));
  CHECK(k(0, 1) == doctest::Approx(std::exp(-std::log(3.0))).epsilon(1e-14));
  CHECK(k(0, 1) == doctest::Approx(0.3334).epsilon(1e-3));
}

TEST_CASE("kernel matrix is symmetric with unit diagonal and entries in (0, 1]") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + trial % 12;
    const Matrix w = random_matrix(m, 1 + trial % 7, rng);
    const RbfKernel k = rbf_kernel(w);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(k(i, i) == 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(k(i, j) == k(j, i));
        CHECK(k(i, j) > 0.0);
        CHECK(k(i, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("a single particle has kernel [[1]] and zero kernel gradient") {
  Matrix w(1, 4, 0.7);
  const RbfKernel k = rbf_kernel(w);
  CHECK(k.values == Matrix(1, 1, 1.0));
  CHECK(rbf_kernel_gradient(w, k, 0, 0) == std::vector<double>(4, 0.0));
}

TEST_CASE("kernel values are invariant when distances and bandwidth scale together") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix w = random_matrix(6, 3, rng);
    const double c = 0.1 + trial * 0.3;
    Matrix scaled = w;
    for (auto& v : scaled.data) v *= c;
    const RbfKernel a = rbf_kernel(w), b = rbf_kernel(scaled);
    CHECK(b.median == doctest::Approx(c * a.median).epsilon(1e-12));
    CHECK(b.bandwidth == doctest::Approx(c * c * a.bandwidth).epsilon(1e-12));
    for (std::size_t i = 0; i < a.values.data.size(); ++i) {
      CHECK(b.values.data[i] == doctest::Approx(a.values.data[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("kernel gradient matches finite differences on 5-dimensional particles") {
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix w = random_matrix(4, 5, rng);
    const RbfKernel k = rbf_kernel(w);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 4; ++i) {
        const auto g = rbf_kernel_gradient(w, k, j, i);
        for (std::size_t t = 0; t < 5; ++t) {
          // Bandwidth held fixed, as in the update rule.
          auto kval = [&](double delta) {
            double s = 0.0;
            for (std::size_t q = 0; q < 5; ++q) {
              const double diff = w(j, q) + (q == t ? delta : 0.0) - w(i, q);
              s += diff * diff;
            }
            return std::exp(-s / k.bandwidth);
          };
          const double fd = (kval(h) - kval(-h)) / (2 * h);
          CHECK(std::abs(g[t] - fd) < 1e-6);
        }
      }
  }
}

TEST_CASE("direction matches the brute-force double loop for 3 particles in 2-D") {
  Matrix w(3, 2), g(3, 2);
  w.data = {0.0, 0.0, 1.0, 0.5, -0.5, 2.0};
  g.data = {1.0, -1.0, 0.25, 0.5, -2.0, 0.0};
  const Matrix phi = svgd_direction(w, g);
  const Matrix ref = brute_force_direction(w, g);
  for (std::size_t i = 0; i < phi.data.size(); ++i) CHECK(std::abs(phi.data[i] - ref.data[i]) < 1e-12);
}

TEST_CASE("direction matches the brute-force double loop on random sets") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + trial % 9, d = 1 + trial % 13;
    const Matrix w = random_matrix(m, d, rng), g = random_matrix(m, d, rng, 3.0);
    const Matrix phi = svgd_direction(w, g);
    const Matrix ref = brute_force_direction(w, g);
    for (std::size_t i = 0; i < phi.data.size(); ++i) CHECK(std::abs(phi.data[i] - ref.data[i]) < 1e-12);
  }
}

TEST_CASE("one particle reduces to the log-posterior gradient bitwise") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial;
    const Matrix w = random_matrix(1, d, rng), g = random_matrix(1, d, rng, 10.0);
    CHECK(svgd_direction(w, g) == g);
  }
}

TEST_CASE("two identical particles with zero gradient do not move") {
  const Matrix w(2, 3, 0.4), g(2, 3, 0.0);
  const Matrix phi = svgd_direction(w, g);
  for (double v : phi.data) CHECK(v == 0.0);
}

TEST_CASE("direction rejects mismatched gradients") {
  CHECK_THROWS_AS(svgd_direction(Matrix(2, 3), Matrix(2, 2)), ShapeError);
  CHECK_THROWS_AS(svgd_direction(Matrix(2, 3), Matrix(3, 3)), ShapeError);
}

TEST_CASE("SVGD with Adam recovers a standard normal in at least 9 of 10 seeds") {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = svgd_standard_normal(seed);
    INFO("seed " << seed << " mean " << m.mean << " std " << m.stddev);
    if (std::abs(m.mean) <= 0.1 && m.stddev >= 0.85 && m.stddev <= 1.15) ++ok;
  }
  CHECK(ok >= 9);
}

TEST_CASE("train_svgd draws particles from the prior and is deterministic") {
  const ModelSpec spec{ModelKind::kDense3, 3, 2, 0.2};
  const ToyData data = toy_regression(20, 3, 2, 2);
  TrainConfig c;
  c.epochs = 2;
  c.decay_epoch = 1;
  c.batch_size = 8;
  c.particles = 4;
  c.seed = 11;

  TrainConfig frozen = c;
  frozen.learning_rate = 0.0;
  const ParticleSet init = train_svgd(spec, data.samples, data.targets, frozen);
  CHECK(init.rows == 4);
  CHECK(init.cols == build_layout(spec).dimension());
  double sum_sq = 0.0;
  for (double v : init.data) sum_sq += v * v;
  CHECK(std::sqrt(sum_sq / static_cast<double>(init.data.size())) == doctest::Approx(0.1).epsilon(0.02));

  TrainTrace trace;
  const ParticleSet a = train_svgd(spec, data.samples, data.targets, c, &trace);
  const ParticleSet b = train_svgd(spec, data.samples, data.targets, c);
  CHECK(a == b);
  CHECK_FALSE(a == init);
  for (double l : trace.step_losses) CHECK(std::isfinite(l));
}

TEST_CASE("SteinUpdater with learning rate zero keeps particles fixed") {
  std::mt19937_64 rng(6);
  const Matrix w = random_matrix(5, 3, rng);
  SteinUpdater u(w);
  u.apply(random_matrix(5, 3, rng), 0.0);
  CHECK(u.particles() == w);
}
