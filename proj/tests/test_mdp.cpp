#include <cmath>
#include <map>

#include "coagent/error.hpp"
#include "coagent/mdp.hpp"
#include "doctest.h"

using namespace coagent;

TEST_CASE("discounted_return examples") {
  const Vector ones = {1, 1, 1};
  CHECK(discounted_return(ones, 1.0, 0) == 3.0);
  CHECK(discounted_return(ones, 0.0, 0) == 1.0);
  const Vector powers = {2, 4, 8};
  CHECK(discounted_return(powers, 0.5, 0) == 6.0);
  CHECK_THROWS_AS(discounted_return(powers, 0.5, 3), InputError);
}

TEST_CASE("discounted_return satisfies G_t = R_t + gamma G_{t+1}") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next() % 30;
    Vector rewards(n);
    for (double& r : rewards) r = rng.uniform(-5, 5);
    const double gamma = rng.uniform();
    const Vector all = discounted_returns(rewards, gamma);
    for (std::size_t t = 0; t < n; ++t) {
      const double g = discounted_return(rewards, gamma, t);
      CHECK(std::abs(g - all[t]) <= 1e-12);
      const double next = t + 1 < n ? discounted_return(rewards, gamma, t + 1) : 0.0;
      CHECK(std::abs(g - (rewards[t] + gamma * next)) <= 1e-12);
    }
  }
}

TEST_CASE("chain2 reset and step") {
  TabularEnvironment env("chain2", chain2_model(3));
  Rng rng(1);
  const Vector obs = env.reset(rng);
  CHECK(env.state() == 0);
  CHECK(obs == Vector{1.0, 0.0});
  auto step = env.step(std::size_t{1}, rng);
  CHECK(env.state() == 1);
  CHECK(step.reward == 1.0);
  CHECK_FALSE(step.done);
  step = env.step(std::size_t{0}, rng);
  CHECK(env.state() == 0);
  CHECK(step.reward == 0.0);
  step = env.step(std::size_t{1}, rng);
  CHECK(step.done);  // horizon 3
  CHECK_THROWS_AS(env.step(std::size_t{1}, rng), InputError);
}

TEST_CASE("env_step rejects out-of-range actions") {
  TabularEnvironment env("chain2", chain2_model());
  Rng rng(2);
  env.reset(rng);
  CHECK_THROWS_AS(env.step(std::size_t{2}, rng), InputError);
  CHECK_THROWS_AS(env.step(Vector{0.0}, rng), InputError);

  PointMassEnvironment pm;
  pm.reset(rng);
  CHECK_THROWS_AS(pm.step(Vector{1.5, 0.0}, rng), InputError);
  CHECK_THROWS_AS(pm.step(Vector{0.0}, rng), InputError);
  CHECK_THROWS_AS(pm.step(std::size_t{0}, rng), InputError);
}

TEST_CASE("gridworld5 start, walls and goal") {
  TabularEnvironment env("gridworld5", gridworld5_model());
  Rng rng(3);
  env.reset(rng);
  CHECK(env.state() == 0);
  // up and left from (0,0) bump into walls
  auto step = env.step(std::size_t{0}, rng);
  CHECK(env.state() == 0);
  CHECK(step.reward == -1.0);
  step = env.step(std::size_t{3}, rng);
  CHECK(env.state() == 0);
  CHECK(step.reward == -1.0);
  // right x4, down x4 reaches the goal; the final step pays 0 and ends
  for (int k = 0; k < 4; ++k) env.step(std::size_t{1}, rng);
  for (int k = 0; k < 3; ++k) CHECK(env.step(std::size_t{2}, rng).reward == -1.0);
  step = env.step(std::size_t{2}, rng);
  CHECK(env.state() == 24);
  CHECK(step.reward == 0.0);
  CHECK(step.done);
}

TEST_CASE("gridworld5 optimal return by value iteration") {
  // 8 moves: 7 cost -1, the goal-entering move pays 0
  CHECK(optimal_return(gridworld5_model(), 1.0) == doctest::Approx(-7.0).epsilon(1e-15));
  const double gamma = 0.9;
  double expected = 0.0;
  for (int k = 0; k < 7; ++k) expected -= std::pow(gamma, k);
  CHECK(optimal_return(gridworld5_model(), gamma) == doctest::Approx(expected).epsilon(1e-14));
  // horizon too short to reach the goal: every step costs
  CHECK(optimal_return(gridworld5_model(5), 1.0) == doctest::Approx(-5.0));
}

TEST_CASE("pointmass reset is reproducible and inside the box") {
  PointMassEnvironment a;
  PointMassEnvironment b;
  Rng ra(99);
  Rng rb(99);
  const Vector x = a.reset(ra);
  const Vector y = b.reset(rb);
  CHECK(x == y);
  REQUIRE(x.size() == 4);
  CHECK(std::abs(x[0]) <= 1.0);
  CHECK(std::abs(x[1]) <= 1.0);
  CHECK(std::abs(x[2]) <= 0.1);
  CHECK(std::abs(x[3]) <= 0.1);
}

TEST_CASE("pointmass episode ends at the horizon with negative-distance reward") {
  PointMassEnvironment env;
  Rng rng(5);
  env.reset(rng);
  StepOutcome out;
  std::size_t steps = 0;
  do {
    out = env.step(Vector{0.0, 0.0}, rng);
    ++steps;
    CHECK(out.reward == doctest::Approx(-std::hypot(out.observation[0], out.observation[1])));
  } while (!out.done);
  CHECK(steps == 200);
}

TEST_CASE("tabular model validation") {
  TabularModel m = chain2_model();
  m.transition[0][0] = 0.9;
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m = chain2_model();
  m.gamma = 1.5;
  CHECK_THROWS_AS(m.validate(), ValidationError);
  CHECK_THROWS_AS(make_environment("mujoco"), ValidationError);
}

TEST_CASE("sampled transitions match the probability table") {
  Rng model_rng(7);
  const TabularModel model = random_tabular_model(model_rng, 2, 2, 1, 1.0);
  TabularEnvironment env("random", model);
  Rng rng(8);
  constexpr std::size_t kSamples = 100000;
  const std::size_t action = 1;
  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  for (std::size_t n = 0; n < kSamples; ++n) {
    env.reset(rng);
    const std::size_t s = env.state();
    env.step(action, rng);
    counts[{s, env.state()}] += 1.0;
  }
  double chi2 = 0.0;
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t next = 0; next < 2; ++next) {
      const double p = model.initial[s] * model.transition_row(s, action)[next];
      const double expected = p * kSamples;
      const double observed = counts[{s, next}];
      const double se = std::sqrt(kSamples * p * (1 - p));
      CHECK(std::abs(observed - expected) <= 3.0 * se);
      chi2 += (observed - expected) * (observed - expected) / expected;
    }
  }
  // 3 degrees of freedom, significance 0.01
  CHECK(chi2 < 11.345);
}

TEST_CASE("hold semantics scan") {
  Trajectory tr;
  AtomicStepRecord first;
  first.executed = {1, 1};
  first.outputs = {0, 1};
  AtomicStepRecord second = first;
  second.executed = {0, 1};
  second.outputs = {0, 0};
  tr.steps = {first, second};
  CHECK(satisfies_hold_semantics(tr));
  tr.steps[1].outputs[0] = 1;
  CHECK_FALSE(satisfies_hold_semantics(tr));
  tr.steps[0].executed[1] = 0;
  tr.steps[1].outputs[0] = 0;
  CHECK_FALSE(satisfies_hold_semantics(tr));
}
