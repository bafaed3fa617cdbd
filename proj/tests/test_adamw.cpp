#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "traindyn/adamw.hpp"

using namespace traindyn;

TEST_CASE("hand-derived first step") {
  AdamWConfig config;
  config.learning_rate = 0.1;
  config.weight_decay = 0.0;
  std::vector<double> params = {1.0};
  std::vector<double> grads = {0.5};
  AdamWState state(1);
  adamw_step(params, grads, state, config);

  // m = 0.05, v = 0.00025; bias-corrected m_hat = 0.5, v_hat = 0.25.
  const double expected = 1.0 - 0.1 * (0.5 / (std::sqrt(0.25) + 1e-8));
  CHECK(params[0] == doctest::Approx(expected).epsilon(1e-10));
  CHECK(std::abs(params[0] - 0.9) < 1e-8);
  CHECK(state.step == 1);
}

TEST_CASE("zero gradient with zero state leaves parameters put") {
  AdamWConfig config;
  config.weight_decay = 0.0;
  std::vector<double> params = {0.3, -0.7};
  const std::vector<double> snapshot(params);
  std::vector<double> grads = {0.0, 0.0};
  AdamWState state(2);
  adamw_step(params, grads, state, config);
  CHECK(params == snapshot);
}

TEST_CASE("decoupled decay isolation") {
  AdamWConfig config;
  config.learning_rate = 0.1;
  config.weight_decay = 0.01;
  std::vector<double> params = {2.0, -3.0, 0.5};
  std::vector<double> grads = {0.0, 0.0, 0.0};
  AdamWState state(3);
  adamw_step(params, grads, state, config);
  CHECK(params[0] == doctest::Approx(2.0 * (1.0 - 0.001)).epsilon(1e-15));
  CHECK(params[1] == doctest::Approx(-3.0 * (1.0 - 0.001)).epsilon(1e-15));
  CHECK(params[2] == doctest::Approx(0.5 * (1.0 - 0.001)).epsilon(1e-15));
}

TEST_CASE("zero betas degenerate to sign-scaled SGD") {
  AdamWConfig config;
  config.learning_rate = 0.05;
  config.beta1 = 0.0;
  config.beta2 = 0.0;
  config.weight_decay = 0.0;
  std::vector<double> params = {1.0, 1.0, 1.0};
  std::vector<double> grads = {0.4, -0.2, 0.0};
  AdamWState state(3);
  adamw_step(params, grads, state, config);
  for (int i = 0; i < 3; ++i) {
    const double g = grads[i];
    const double expected = 1.0 - 0.05 * (g / (std::abs(g) + 1e-8));
    CHECK(params[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("bias correction decays over steps") {
  AdamWConfig config;
  config.learning_rate = 0.1;
  config.weight_decay = 0.0;
  std::vector<double> params = {0.0};
  std::vector<double> grads = {1.0};
  AdamWState state(1);
  // Constant gradient: every update is exactly -lr * 1/(1 + eps-ish).
  for (int step = 0; step < 5; ++step) {
    const double before = params[0];
    adamw_step(params, grads, state, config);
    const double update = before - params[0];
    CHECK(update == doctest::Approx(0.1).epsilon(1e-6));
  }
  CHECK(state.step == 5);
}

TEST_CASE("invalid inputs are rejected") {
  AdamWConfig config;
  std::vector<double> params = {1.0};
  std::vector<double> bad_grads = {std::nan("")};
  AdamWState state(1);
  CHECK_THROWS_AS(adamw_step(params, bad_grads, state, config), std::invalid_argument);

  std::vector<double> short_grads = {};
  CHECK_THROWS_AS(adamw_step(params, short_grads, state, config), std::invalid_argument);

  AdamWConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = AdamWConfig{};
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = AdamWConfig{};
  bad.weight_decay = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
