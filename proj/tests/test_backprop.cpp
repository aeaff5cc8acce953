#include <doctest.h>

#include "oracles.hpp"
#include "steinrul/error.hpp"
#include "steinrul/trainers.hpp"

using namespace steinrul;
using namespace steinrul::testing;

namespace {
TrainConfig toy_config(std::uint64_t seed) {
  TrainConfig c;
  c.epochs = 50;
  c.batch_size = 16;
  c.decay_epoch = 40;
  c.learning_rate = 0.01;
  c.seed = seed;
  return c;
}
}  // namespace

TEST_CASE("learning rate zero leaves the Kaiming initialization untouched") {
  const ModelSpec spec{ModelKind::kDense3, 3, 2, 0.2};
  const Tensor sample({1, 3, 2}, 0.5);
  const std::vector<double> target{10.0};
  TrainConfig c = toy_config(4);
  c.epochs = 1;
  c.decay_epoch = 1;
  c.learning_rate = 0.0;
  const ModelInstance m = train_backprop(spec, sample, target, c);
  Rng init = make_stream(4, "init");
  CHECK(m.params() == kaiming_uniform_init(build_layout(spec), init));
}

TEST_CASE("training loss decreases on a toy linear set in at least 9 of 10 seeds") {
  const ModelSpec spec{ModelKind::kDense3, 4, 3, 0.2};
  const ToyData data = toy_regression(128, 4, 3, 99);
  int decreasing = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainTrace trace;
    train_backprop(spec, data.samples, data.targets, toy_config(seed), &trace);
    REQUIRE(trace.epoch_losses.size() == 50);
    for (double l : trace.step_losses) CHECK(std::isfinite(l));
    // Dropout noise makes single epochs jitter; compare the first and last five.
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 5; ++i) {
      head += trace.epoch_losses[i];
      tail += trace.epoch_losses[45 + i];
    }
    if (tail <= head) ++decreasing;
  }
  CHECK(decreasing >= 9);
}

TEST_CASE("backprop is deterministic for a fixed seed") {
  const ModelSpec spec{ModelKind::kConv2Pool2, 10, 14, 0.2};
  const ToyData data = toy_regression(40, 10, 14, 3);
  TrainConfig c = toy_config(7);
  c.epochs = 3;
  c.decay_epoch = 2;
  const auto a = train_backprop(spec, data.samples, data.targets, c).params();
  const auto b = train_backprop(spec, data.samples, data.targets, c).params();
  CHECK(a == b);
  c.seed = 8;
  CHECK_FALSE(a == train_backprop(spec, data.samples, data.targets, c).params());
}

TEST_CASE("backprop input validation") {
  const ModelSpec spec{ModelKind::kDense3, 2, 2, 0.2};
  TrainConfig c = toy_config(0);
  CHECK_THROWS_AS(train_backprop(spec, Tensor({2, 2, 2}), std::vector<double>{1.0}, c), ShapeError);
  c.epochs = 0;
  CHECK_THROWS_AS(train_backprop(spec, Tensor({1, 2, 2}), std::vector<double>{1.0}, c), ConfigError);
}

TEST_CASE("a diverging run aborts with a numeric error naming the step") {
  const ModelSpec spec{ModelKind::kDense3, 2, 2, 0.0};
  const Tensor x({4, 2, 2}, 1.0);
  const std::vector<double> y(4, 1e308);
  TrainConfig c = toy_config(0);
  c.epochs = 2;
  c.decay_epoch = 1;
  try {
    train_backprop(spec, x, y, c);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}
