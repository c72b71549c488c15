#include "coagent/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "coagent/error.hpp"

namespace coagent {

namespace {

void check_distribution(std::span<const double> probs, const char* what) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ValidationError(std::string(what) + ": negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << what << ": probabilities sum to " << total;
    throw ValidationError(os.str());
  }
}

}  // namespace

double TabularModel::expected_reward(std::size_t s, std::size_t a, std::size_t next) const {
  double total = 0.0;
  for (const auto& outcome : rewards(s, a, next)) total += outcome.value * outcome.probability;
  return total;
}

void TabularModel::validate() const {
  if (num_states == 0 || num_actions == 0) throw ValidationError("tabular model: empty state or action set");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("tabular model: gamma outside [0,1]");
  if (horizon == 0) throw ValidationError("tabular model: horizon must be positive");
  if (initial.size() != num_states || transition.size() != num_states * num_actions ||
      reward.size() != num_states * num_actions * num_states || terminal.size() != num_states) {
    throw ValidationError("tabular model: table sizes do not match state/action counts");
  }
  check_distribution(initial, "initial distribution");
  for (const auto& row : transition) {
    if (row.size() != num_states) throw ValidationError("tabular model: transition row size");
    check_distribution(row, "transition row");
  }
  for (const auto& outcomes : reward) {
    if (outcomes.empty()) throw ValidationError("tabular model: empty reward outcome set");
    Vector probs;
    probs.reserve(outcomes.size());
    for (const auto& o : outcomes) probs.push_back(o.probability);
    check_distribution(probs, "reward outcomes");
  }
}

namespace {

TabularModel empty_model(std::size_t states, std::size_t actions, std::size_t horizon, double gamma) {
  TabularModel m;
  m.num_states = states;
  m.num_actions = actions;
  m.initial.assign(states, 0.0);
  m.transition.assign(states * actions, Vector(states, 0.0));
  m.reward.assign(states * actions * states, {RewardOutcome{0.0, 1.0}});
  m.terminal.assign(states, 0);
  m.horizon = horizon;
  m.gamma = gamma;
  return m;
}

}  // namespace

TabularModel chain2_model(std::size_t horizon, double gamma) {
  TabularModel m = empty_model(2, 2, horizon, gamma);
  m.initial[0] = 1.0;
  for (std::size_t s = 0; s < 2; ++s) {
    m.transition[s * 2 + 0][0] = 1.0;
    m.transition[s * 2 + 1][1] = 1.0;
    m.reward[(s * 2 + 1) * 2 + 1] = {RewardOutcome{1.0, 1.0}};
  }
  m.validate();
  return m;
}

TabularModel random_tabular_model(Rng& rng, std::size_t num_states, std::size_t num_actions,
                                  std::size_t horizon, double gamma) {
  TabularModel m = empty_model(num_states, num_actions, horizon, gamma);
  auto random_distribution = [&](Vector& row) {
    double total = 0.0;
    for (double& p : row) {
      p = 0.1 + rng.uniform();
      total += p;
    }
    for (double& p : row) p /= total;
    // force an exact sum so validate() holds at 1e-12
    double rest = 1.0;
    for (std::size_t k = 0; k + 1 < row.size(); ++k) rest -= row[k];
    row.back() = rest;
  };
  random_distribution(m.initial);
  for (auto& row : m.transition) random_distribution(row);
  for (auto& outcomes : m.reward) {
    const double p = 0.2 + 0.6 * rng.uniform();
    outcomes = {RewardOutcome{rng.uniform(-1.0, 1.0), p}, RewardOutcome{rng.uniform(-1.0, 1.0), 1.0 - p}};
  }
  m.validate();
  return m;
}

TabularModel gridworld5_model(std::size_t horizon, double gamma) {
  constexpr std::size_t kSide = 5;
  constexpr std::size_t kGoal = kSide * kSide - 1;
  TabularModel m = empty_model(kSide * kSide, 4, horizon, gamma);
  m.initial[0] = 1.0;
  m.terminal[kGoal] = 1;
  constexpr int kRowDelta[4] = {-1, 0, 1, 0};
  constexpr int kColDelta[4] = {0, 1, 0, -1};
  for (std::size_t s = 0; s < kSide * kSide; ++s) {
    const int row = static_cast<int>(s / kSide);
    const int col = static_cast<int>(s % kSide);
    for (std::size_t a = 0; a < 4; ++a) {
      if (m.terminal[s]) {
        m.transition[s * 4 + a][s] = 1.0;
        continue;
      }
      const int r = row + kRowDelta[a];
      const int c = col + kColDelta[a];
      const bool inside = r >= 0 && r < static_cast<int>(kSide) && c >= 0 && c < static_cast<int>(kSide);
      const std::size_t next = inside ? static_cast<std::size_t>(r) * kSide + static_cast<std::size_t>(c) : s;
      m.transition[s * 4 + a][next] = 1.0;
      m.reward[(s * 4 + a) * m.num_states + next] = {RewardOutcome{next == kGoal ? 0.0 : -1.0, 1.0}};
    }
  }
  m.validate();
  return m;
}

double optimal_return(const TabularModel& model, double gamma) {
  const std::size_t S = model.num_states;
  const std::size_t A = model.num_actions;
  Vector value(S, 0.0);  // zero steps remaining
  Vector next_value(S);
  for (std::size_t remaining = 1; remaining <= model.horizon; ++remaining) {
    for (std::size_t s = 0; s < S; ++s) {
      if (model.terminal[s]) {
        next_value[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < A; ++a) {
        const Vector& row = model.transition_row(s, a);
        double q = 0.0;
        for (std::size_t n = 0; n < S; ++n) {
          if (row[n] == 0.0) continue;
          q += row[n] * (model.expected_reward(s, a, n) + gamma * value[n]);
        }
        best = std::max(best, q);
      }
      next_value[s] = best;
    }
    value.swap(next_value);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < S; ++s) total += model.initial[s] * value[s];
  return total;
}

TabularEnvironment::TabularEnvironment(std::string name, TabularModel model)
    : name_(std::move(name)), model_(std::move(model)) {
  model_.validate();
}

Vector TabularEnvironment::one_hot(std::size_t s) const {
  Vector v(model_.num_states, 0.0);
  v[s] = 1.0;
  return v;
}

Vector TabularEnvironment::reset(Rng& rng) {
  state_ = rng.categorical(model_.initial);
  t_ = 0;
  done_ = model_.terminal[state_] != 0;
  return one_hot(state_);
}

StepOutcome TabularEnvironment::step(const Action& action, Rng& rng) {
  const auto* index = std::get_if<std::size_t>(&action);
  if (index == nullptr) throw InputError(name_ + ": expected a discrete action");
  if (*index >= model_.num_actions) throw InputError(name_ + ": action index out of range");
  if (done_) throw InputError(name_ + ": step called on a finished episode");
  const std::size_t next = rng.categorical(model_.transition_row(state_, *index));
  const auto& outcomes = model_.rewards(state_, *index, next);
  double reward = outcomes.front().value;
  if (outcomes.size() > 1) {
    Vector probs;
    for (const auto& o : outcomes) probs.push_back(o.probability);
    reward = outcomes[rng.categorical(probs)].value;
  }
  state_ = next;
  ++t_;
  done_ = model_.terminal[state_] != 0 || t_ >= model_.horizon;
  return {one_hot(state_), reward, done_};
}

PointMassEnvironment::PointMassEnvironment(PointMassOptions options) : options_(options) {
  if (options_.horizon == 0) throw ValidationError("pointmass: horizon must be positive");
}

Vector PointMassEnvironment::reset(Rng& rng) {
  state_[0] = rng.uniform(-options_.position_range, options_.position_range);
  state_[1] = rng.uniform(-options_.position_range, options_.position_range);
  state_[2] = rng.uniform(-options_.velocity_range, options_.velocity_range);
  state_[3] = rng.uniform(-options_.velocity_range, options_.velocity_range);
  t_ = 0;
  done_ = false;
  return {state_[0], state_[1], state_[2], state_[3]};
}

StepOutcome PointMassEnvironment::step(const Action& action, Rng& /*rng*/) {
  const auto* accel = std::get_if<Vector>(&action);
  if (accel == nullptr || accel->size() != 2) throw InputError("pointmass: expected a 2-dimensional action");
  for (double a : *accel) {
    if (!(a >= -1.0 && a <= 1.0)) throw InputError("pointmass: action component outside [-1, 1]");
  }
  if (done_) throw InputError("pointmass: step called on a finished episode");
  const double dt = options_.dt;
  for (std::size_t d = 0; d < 2; ++d) {
    state_[2 + d] += dt * (*accel)[d];
    state_[d] += dt * state_[2 + d];
    if (std::abs(state_[d]) > options_.position_limit) {
      state_[d] = std::copysign(options_.position_limit, state_[d]);
      state_[2 + d] = 0.0;
    }
  }
  ++t_;
  done_ = t_ >= options_.horizon;
  const double reward = -std::hypot(state_[0], state_[1]);
  return {{state_[0], state_[1], state_[2], state_[3]}, reward, done_};
}

std::unique_ptr<Environment> make_environment(std::string_view name) {
  if (name == "chain2") return std::make_unique<TabularEnvironment>("chain2", chain2_model());
  if (name == "gridworld5") return std::make_unique<TabularEnvironment>("gridworld5", gridworld5_model());
  if (name == "pointmass") return std::make_unique<PointMassEnvironment>();
  throw ValidationError("unknown environment '" + std::string(name) + "'");
}

double discounted_return(std::span<const double> rewards, double gamma, std::size_t t) {
  if (t >= rewards.size()) throw InputError("discounted_return: t past end of reward sequence");
  double total = 0.0;
  for (std::size_t k = rewards.size(); k-- > t;) total = rewards[k] + gamma * total;
  return total;
}

Vector discounted_returns(std::span<const double> rewards, double gamma) {
  Vector returns(rewards.size());
  double running = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    running = rewards[k] + gamma * running;
    returns[k] = running;
  }
  return returns;
}

Vector Trajectory::rewards() const {
  Vector r;
  r.reserve(steps.size());
  for (const auto& s : steps) r.push_back(s.reward);
  return r;
}

bool satisfies_hold_semantics(const Trajectory& trajectory) {
  for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
    const auto& step = trajectory.steps[t];
    for (std::size_t i = 0; i < step.executed.size(); ++i) {
      if (step.executed[i]) continue;
      if (t == 0) return false;
      if (step.outputs[i] != trajectory.steps[t - 1].outputs[i]) return false;
    }
  }
  return true;
}

}  // namespace coagent
