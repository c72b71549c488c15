#include "coagent/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "coagent/error.hpp"
#include "coagent/learning.hpp"

namespace coagent {

namespace {

class Enumerator {
 public:
  Enumerator(const TabularModel& model, const NetworkTopology& topology, std::span<const double> theta_nu,
             std::size_t horizon, const TrajectoryVisitor& visit, const EnumerationOptions& options)
      : model_(model), topology_(topology), theta_nu_(theta_nu), horizon_(horizon), visit_(visit), options_(options) {}

  EnumerationStats run() {
    for (std::size_t k = 0; k < model_.num_states; ++k) {
      const std::size_t s = order(k, model_.num_states);
      if (model_.initial[s] == 0.0) continue;
      count_node();
      step(s, {}, model_.initial[s]);
    }
    return stats_;
  }

 private:
  std::size_t order(std::size_t k, std::size_t n) const { return options_.reverse_branches ? n - 1 - k : k; }

  void count_node() {
    if (++stats_.nodes > options_.node_budget) {
      throw ResourceError("enumeration exceeded the node budget of " + std::to_string(options_.node_budget));
    }
  }

  void leaf(double probability) {
    ++stats_.leaves;
    stats_.leaf_probability += probability;
    visit_(probability, trajectory_);
  }

  // One atomic step starting in state s with the previous outputs `held`.
  void step(std::size_t s, const std::vector<std::size_t>& held, double probability) {
    const std::size_t t = trajectory_.steps.size();
    if (t >= horizon_ || model_.terminal[s]) {
      leaf(probability);
      return;
    }
    AtomicStepRecord record;
    record.observation.assign(model_.num_states, 0.0);
    record.observation[s] = 1.0;
    const std::size_t m = topology_.size();
    record.executed.assign(m, 0);
    record.inputs.resize(m);
    record.outputs.assign(m, 0);
    coagent(0, s, held, record, probability);
  }

  void coagent(std::size_t i, std::size_t s, const std::vector<std::size_t>& held, AtomicStepRecord& record,
               double probability) {
    if (i == topology_.size()) {
      record.action = assemble_action(topology_, record.outputs);
      transition(s, record, probability);
      return;
    }
    const std::size_t t = trajectory_.steps.size();
    const auto& spec = topology_.coagent(i);
    record.inputs[i] = topology_.gather_input(i, record.observation, record.outputs);
    const double p_exec = t == 0 ? 1.0 : execution_probability(spec.execution, record.inputs[i]);

    auto executed_branch = [&] {
      if (p_exec <= 0.0) return;
      const Vector probs = coagent_policy_probs(spec, record.inputs[i], topology_.coagent_params(theta_nu_, i));
      for (std::size_t k = 0; k < probs.size(); ++k) {
        const std::size_t u = order(k, probs.size());
        if (probs[u] == 0.0) continue;
        count_node();
        record.executed[i] = 1;
        record.outputs[i] = u;
        coagent(i + 1, s, held, record, probability * p_exec * probs[u]);
      }
    };
    auto held_branch = [&] {
      if (p_exec >= 1.0) return;
      count_node();
      record.executed[i] = 0;
      record.outputs[i] = held[i];
      coagent(i + 1, s, held, record, probability * (1.0 - p_exec));
    };
    if (options_.reverse_branches) {
      held_branch();
      executed_branch();
    } else {
      executed_branch();
      held_branch();
    }
  }

  void transition(std::size_t s, const AtomicStepRecord& record, double probability) {
    const std::size_t a = std::get<std::size_t>(record.action);
    const Vector& row = model_.transition_row(s, a);
    for (std::size_t k = 0; k < model_.num_states; ++k) {
      const std::size_t next = order(k, model_.num_states);
      if (row[next] == 0.0) continue;
      const auto& outcomes = model_.rewards(s, a, next);
      for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& outcome = outcomes[order(r, outcomes.size())];
        if (outcome.probability == 0.0) continue;
        count_node();
        trajectory_.steps.push_back(record);
        trajectory_.steps.back().reward = outcome.value;
        step(next, record.outputs, probability * row[next] * outcome.probability);
        trajectory_.steps.pop_back();
      }
    }
  }

  const TabularModel& model_;
  const NetworkTopology& topology_;
  std::span<const double> theta_nu_;
  std::size_t horizon_;
  const TrajectoryVisitor& visit_;
  EnumerationOptions options_;
  EnumerationStats stats_;
  Trajectory trajectory_;
};

void check_discrete(const TabularModel& model, const NetworkTopology& topology) {
  const auto* d = std::get_if<DiscreteAssembler>(&topology.assembler());
  if (d == nullptr) throw InputError("enumeration needs a discrete action assembler");
  if (topology.coagent(d->coagent).num_outputs() != model.num_actions) {
    throw InputError("action coagent output count does not match the model's action count");
  }
  if (topology.observation_dim() != model.num_states) {
    throw InputError("network observation dimension does not match the one-hot state encoding");
  }
}

}  // namespace

EnumerationStats enumerate_trajectories(const TabularModel& model, const NetworkTopology& topology,
                                        std::span<const double> theta_nu, std::size_t horizon,
                                        const TrajectoryVisitor& visit, const EnumerationOptions& options) {
  check_discrete(model, topology);
  if (theta_nu.size() != topology.num_nonunique()) throw InputError("enumeration: parameter vector has wrong length");
  Enumerator e(model, topology, theta_nu, horizon, visit, options);
  return e.run();
}

double exact_objective(const TabularModel& model, const NetworkTopology& topology,
                       std::span<const double> theta_unique, std::size_t horizon, const EnumerationOptions& options,
                       EnumerationStats* stats) {
  const Vector theta_nu = topology.sharing().expand(theta_unique);
  double total = 0.0;
  const auto result = enumerate_trajectories(
      model, topology, theta_nu, horizon,
      [&](double probability, const Trajectory& trajectory) {
        const Vector rewards = trajectory.rewards();
        if (!rewards.empty()) total += probability * discounted_return(rewards, model.gamma, 0);
      },
      options);
  if (stats != nullptr) *stats = result;
  return total;
}

Vector exact_estimator_expectation(const TabularModel& model, const NetworkTopology& topology,
                                   std::span<const double> theta_unique, std::size_t horizon,
                                   const EnumerationOptions& options, EnumerationStats* stats) {
  const Vector theta_nu = topology.sharing().expand(theta_unique);
  Vector total(theta_unique.size(), 0.0);
  const auto result = enumerate_trajectories(
      model, topology, theta_nu, horizon,
      [&](double probability, const Trajectory& trajectory) {
        if (trajectory.steps.empty()) return;
        const GradientBundle bundle = reinforce_gradient(topology, theta_nu, trajectory, model.gamma);
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += probability * bundle.unique[k];
      },
      options);
  if (stats != nullptr) *stats = result;
  return total;
}

Vector finite_difference_gradient(const std::function<double(std::span<const double>)>& objective,
                                  std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw InputError("finite_difference_gradient: step must be positive");
  Vector point(theta.begin(), theta.end());
  Vector grad(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = point[k];
    point[k] = saved + h;
    const double up = objective(point);
    point[k] = saved - h;
    const double down = objective(point);
    point[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, relative_error(a[k], b[k]));
  return worst;
}

}  // namespace coagent
