#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "coagent/mdp.hpp"
#include "coagent/network.hpp"

namespace coagent {

struct EnumerationOptions {
  std::size_t node_budget = 10'000'000;
  /// Visit every branch set in reverse order. The totals must not depend
  /// on it beyond rounding.
  bool reverse_branches = false;
};

struct EnumerationStats {
  std::size_t nodes = 0;
  std::size_t leaves = 0;
  double leaf_probability = 0.0;  // sums to 1 for a complete tree
};

/// Called once per complete trajectory with its probability. Execution
/// outcomes, coagent outputs, transitions and reward outcomes are all
/// branched on.
using TrajectoryVisitor = std::function<void(double probability, const Trajectory& trajectory)>;

/// Walks the full tree of trajectories of `topology` acting in `model` for
/// up to `horizon` atomic steps. Throws ResourceError past the node budget.
EnumerationStats enumerate_trajectories(const TabularModel& model, const NetworkTopology& topology,
                                        std::span<const double> theta_nu, std::size_t horizon,
                                        const TrajectoryVisitor& visit, const EnumerationOptions& options = {});

/// J = E[sum_t gamma^t R_t], with gamma taken from the model.
double exact_objective(const TabularModel& model, const NetworkTopology& topology,
                       std::span<const double> theta_unique, std::size_t horizon,
                       const EnumerationOptions& options = {}, EnumerationStats* stats = nullptr);

/// Exact expectation of the episode estimator in the unique space.
Vector exact_estimator_expectation(const TabularModel& model, const NetworkTopology& topology,
                                   std::span<const double> theta_unique, std::size_t horizon,
                                   const EnumerationOptions& options = {}, EnumerationStats* stats = nullptr);

/// Central differences (f(theta + h e_k) - f(theta - h e_k)) / 2h.
Vector finite_difference_gradient(const std::function<double(std::span<const double>)>& objective,
                                  std::span<const double> theta, double h = 1e-5);

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

/// Largest per-coordinate relative error.
double max_relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace coagent

#include <cstdint>
#include <string>
#include <vector>

namespace coagent {

/// Randomized tiny instances on which the estimator is checked against
/// finite differences of the exact objective.
enum class GradientCase {
  kSynchronous,         // binary hidden -> action coagent, no sharing
  kSharedSynchronous,   // same network, one bias tied across the two coagents
  kSharedAsynchronous,  // tied, hidden coagent executes with probability 0.5
  kThreeSlotSharing,    // one 3-output coagent whose slots 2 and 3 share a parameter
};

const char* gradient_case_name(GradientCase c);

struct GradientInstance {
  TabularModel model;
  Network network;  // store.unique holds the random evaluation point
  std::size_t horizon = 3;
};

/// Deterministic in `seed`: random 2-state MDP (stochastic transitions,
/// two-valued rewards, horizon 3), random gamma, parameters in [-1, 1].
GradientInstance make_gradient_instance(GradientCase c, std::uint64_t seed);

struct GradientCheckRow {
  std::string name;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Runs every case on seeds 0..seeds-1 with FD step 1e-5.
std::vector<GradientCheckRow> verify_gradients(std::size_t seeds, double tolerance = 1e-4);

std::string format_gradient_report(const std::vector<GradientCheckRow>& rows);

}  // namespace coagent
