#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coagent/rng.hpp"

namespace coagent {

using Vector = std::vector<double>;

/// Environment action: an index for discrete action spaces, a vector for
/// continuous ones.
using Action = std::variant<std::size_t, Vector>;

struct RewardOutcome {
  double value = 0.0;
  double probability = 1.0;
};

/// Explicit probability tables of a finite MDP. Exposed for exact
/// enumeration; environments that have one also sample from it.
struct TabularModel {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  Vector initial;                                    // d0(s)
  std::vector<Vector> transition;                    // row s*A + a, entry s'
  std::vector<std::vector<RewardOutcome>> reward;    // (s*A + a)*S + s'
  std::vector<std::uint8_t> terminal;                // absorbing, zero reward
  std::size_t horizon = 1;
  double gamma = 1.0;

  const Vector& transition_row(std::size_t s, std::size_t a) const {
    return transition[s * num_actions + a];
  }
  const std::vector<RewardOutcome>& rewards(std::size_t s, std::size_t a, std::size_t next) const {
    return reward[(s * num_actions + a) * num_states + next];
  }
  double expected_reward(std::size_t s, std::size_t a, std::size_t next) const;

  /// Throws ValidationError unless every distribution sums to 1 within
  /// 1e-12, gamma is in [0,1], and the horizon is finite.
  void validate() const;
};

/// 2-state / 2-action deterministic chain. Action 1 ("right") moves to
/// state 1 and pays 1; action 0 ("left") moves to state 0 and pays 0.
TabularModel chain2_model(std::size_t horizon = 3, double gamma = 0.9);

/// Random finite MDP with stochastic transitions and two-valued random
/// rewards per (s, a, s'). Used for randomized gradient checks.
TabularModel random_tabular_model(Rng& rng, std::size_t num_states, std::size_t num_actions,
                                  std::size_t horizon, double gamma);

/// 5x5 grid, start (0,0), goal (4,4). Actions 0..3 = up, right, down, left.
/// Every step costs -1 except the one entering the goal, which pays 0.
TabularModel gridworld5_model(std::size_t horizon = 100, double gamma = 1.0);

/// Value iteration over the finite-horizon tabular model. Returns the
/// optimal expected return from the initial distribution, discounted with
/// `gamma`.
double optimal_return(const TabularModel& model, double gamma);

struct StepOutcome {
  Vector observation;
  double reward = 0.0;
  bool done = false;
};

/// An environment stepped at atomic-time granularity.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  /// Number of discrete actions, or the dimension of a continuous action.
  virtual std::size_t action_size() const = 0;
  virtual std::size_t horizon() const = 0;

  virtual Vector reset(Rng& rng) = 0;
  virtual StepOutcome step(const Action& action, Rng& rng) = 0;

  /// Non-null for enumerable environments.
  virtual const TabularModel* model() const { return nullptr; }
};

/// Samples from a TabularModel. Observations are one-hot state encodings.
class TabularEnvironment final : public Environment {
 public:
  TabularEnvironment(std::string name, TabularModel model);

  std::string name() const override { return name_; }
  std::size_t observation_dim() const override { return model_.num_states; }
  bool discrete_actions() const override { return true; }
  std::size_t action_size() const override { return model_.num_actions; }
  std::size_t horizon() const override { return model_.horizon; }
  Vector reset(Rng& rng) override;
  StepOutcome step(const Action& action, Rng& rng) override;
  const TabularModel* model() const override { return &model_; }

  std::size_t state() const { return state_; }
  Vector one_hot(std::size_t s) const;

 private:
  std::string name_;
  TabularModel model_;
  std::size_t state_ = 0;
  std::size_t t_ = 0;
  bool done_ = true;
};

struct PointMassOptions {
  double position_range = 1.0;  // initial position uniform in [-r, r]^2
  double velocity_range = 0.1;
  double dt = 0.1;
  double position_limit = 5.0;
  std::size_t horizon = 200;
};

/// 2-D point mass. Observation (x, y, vx, vy); action is an acceleration in
/// [-1, 1]^2; reward is minus the distance to the origin after the step.
class PointMassEnvironment final : public Environment {
 public:
  explicit PointMassEnvironment(PointMassOptions options = {});

  std::string name() const override { return "pointmass"; }
  std::size_t observation_dim() const override { return 4; }
  bool discrete_actions() const override { return false; }
  std::size_t action_size() const override { return 2; }
  std::size_t horizon() const override { return options_.horizon; }
  Vector reset(Rng& rng) override;
  StepOutcome step(const Action& action, Rng& rng) override;

 private:
  PointMassOptions options_;
  double state_[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t t_ = 0;
  bool done_ = true;
};

/// "chain2", "gridworld5" or "pointmass". Throws ValidationError otherwise.
std::unique_ptr<Environment> make_environment(std::string_view name);

/// G_t = sum_k gamma^k rewards[t + k].
double discounted_return(std::span<const double> rewards, double gamma, std::size_t t);

/// All G_t at once, by the backward recursion G_t = R_t + gamma G_{t+1}.
Vector discounted_returns(std::span<const double> rewards, double gamma);

/// One atomic time step of a coagent network acting in an environment.
struct AtomicStepRecord {
  Vector observation;
  std::vector<std::uint8_t> executed;  // E^i_t
  std::vector<Vector> inputs;          // X^i_t
  std::vector<std::size_t> outputs;    // index into the coagent's output space
  Action action;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<AtomicStepRecord> steps;
  double episode_return = 0.0;  // G_0

  Vector rewards() const;
};

/// True when every non-executing coagent repeats its previous output and
/// every coagent executes at t = 0.
bool satisfies_hold_semantics(const Trajectory& trajectory);

}  // namespace coagent
