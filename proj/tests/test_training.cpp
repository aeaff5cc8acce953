#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "steinrul/adam.hpp"
#include "steinrul/error.hpp"
#include "steinrul/training.hpp"

using namespace steinrul;

TEST_CASE("huber negative log-likelihood branches") {
  const std::vector<double> zero{0.0};
  CHECK(huber_nll(zero, zero, 100.0) == 0.0);
  CHECK(huber_nll(std::vector<double>{50.0}, zero, 100.0) == 1250.0);
  CHECK(huber_nll(std::vector<double>{200.0}, zero, 100.0) == 15000.0);
  CHECK(huber_nll(std::vector<double>{-200.0}, zero, 100.0) == 15000.0);
  CHECK(huber_nll(std::vector<double>{50.0, 200.0}, std::vector<double>{0.0, 0.0}, 100.0) == 16250.0);
  CHECK_THROWS_AS(huber_nll(zero, zero, 0.0), ConfigError);
  CHECK_THROWS_AS(huber_nll(zero, std::vector<double>{1.0, 2.0}, 1.0), ShapeError);
}

TEST_CASE("huber loss is continuous at the threshold") {
  const double delta = 7.0;
  const std::vector<double> t{0.0};
  const double below = huber_nll(std::vector<double>{delta - 1e-9}, t, delta);
  const double above = huber_nll(std::vector<double>{delta + 1e-9}, t, delta);
  CHECK(std::abs(above - below) < 1e-7);
}

TEST_CASE("Adam leaves parameters alone on a zero gradient") {
  Adam adam(3);
  std::vector<double> w{1.0, -2.0, 3.0};
  const auto before = w;
  for (int i = 0; i < 5; ++i) adam.step(w, std::vector<double>(3, 0.0), 0.01);
  CHECK(w == before);
  CHECK(adam.steps() == 5);
}

TEST_CASE("first Adam step moves each coordinate by about lr against the gradient sign") {
  Adam adam(3);
  std::vector<double> w{0.0, 0.0, 0.0};
  const std::vector<double> g{0.3, -5.0, 1e-3};
  adam.step(w, g, 0.01);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 3; ++i) {
    const double expected = -0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(w[i] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(w[i]) == doctest::Approx(0.01).epsilon(1e-4));
  }
}

TEST_CASE("Adam matches a hand-rolled recurrence over several steps") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  Adam adam(2);
  std::vector<double> w{0.5, -0.5}, m(2, 0), v(2, 0), ref = w;
  for (int t = 1; t <= 20; ++t) {
    const std::vector<double> g{n(rng), n(rng)};
    adam.step(w, g, 0.02);
    for (std::size_t i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.02 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(w[0] == doctest::Approx(ref[0]).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(ref[1]).epsilon(1e-12));
}

TEST_CASE("learning rate decays by the factor from the decay epoch on") {
  TrainConfig c;
  CHECK(learning_rate_at(c, 0) == 0.01);
  CHECK(learning_rate_at(c, 39) == 0.01);
  CHECK(learning_rate_at(c, 40) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(learning_rate_at(c, 49) == doctest::Approx(0.001).epsilon(1e-15));
}

TEST_CASE("default configuration carries the published hyperparameters") {
  const TrainConfig c;
  CHECK(c.epochs == 50);
  CHECK(c.batch_size == 512);
  CHECK(c.learning_rate == 0.01);
  CHECK(c.decay_epoch == 40);
  CHECK(c.decay_factor == 0.1);
  CHECK(c.huber_delta == 100.0);
  CHECK(c.mc_samples == 10);
  CHECK(c.particles == 10);
  CHECK(c.prior_std == 0.1);
  CHECK(c.dropout == 0.2);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("configuration validation") {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.epochs = 0; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.learning_rate = -1; });
  bad([](TrainConfig& c) { c.decay_epoch = 51; });
  bad([](TrainConfig& c) { c.huber_delta = 0; });
  bad([](TrainConfig& c) { c.mc_samples = 0; });
  bad([](TrainConfig& c) { c.particles = 0; });
  bad([](TrainConfig& c) { c.prior_std = 0; });
  bad([](TrainConfig& c) { c.dropout = 1.0; });
}

TEST_CASE("an epoch's batches partition the training set") {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<std::size_t> size(1, 2000), bs(1, 600);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = size(gen), b = bs(gen);
    Rng rng(trial);
    const auto batches = make_batches(n, b, rng);
    std::vector<int> seen(n, 0);
    for (std::size_t k = 0; k < batches.size(); ++k) {
      if (k + 1 < batches.size()) CHECK(batches[k].size() == b);
      for (auto i : batches[k]) ++seen[i];
    }
    CHECK(batches.size() == (n + b - 1) / b);
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST_CASE("consecutive epochs reshuffle") {
  Rng rng(1);
  const auto a = make_batches(100, 10, rng);
  const auto b = make_batches(100, 10, rng);
  CHECK(a != b);
}

TEST_CASE("gathering rows") {
  const Tensor s({3, 2, 1}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> idx{2, 0};
  CHECK(gather_samples(s, idx) == Tensor({2, 2, 1}, std::vector<double>{5, 6, 1, 2}));
  CHECK(gather_targets(std::vector<double>{7, 8, 9}, idx) == Tensor({2}, std::vector<double>{9, 7}));
}

TEST_CASE("labeled streams are reproducible and distinct") {
  Rng a = make_stream(3, "init"), b = make_stream(3, "init");
  CHECK(a() == b());
  CHECK(make_stream(3, "init")() != make_stream(3, "shuffle")());
  CHECK(make_stream(3, "init", 1)() != make_stream(3, "init", 2)());
  CHECK(make_stream(3, "init", 1, 0)() != make_stream(3, "init", 0, 1)());
  CHECK(make_stream(3, "init")() != make_stream(4, "init")());
}
