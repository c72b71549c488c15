#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "coagent/mdp.hpp"
#include "coagent/rng.hpp"

namespace coagent {

/// Contiguous block of the observation vector.
struct ObservationSlice {
  std::size_t begin = 0;
  std::size_t length = 0;
};

/// Output value of an earlier coagent (0-based index).
struct UpstreamOutput {
  std::size_t coagent = 0;
};

using InputSource = std::variant<ObservationSlice, UpstreamOutput>;

struct AlwaysExecute {};

struct BernoulliExecute {
  double probability = 1.0;
};

/// Execution probability looked up by the position of the largest entry
/// of the coagent's input (first on ties). With a one-hot state as input
/// this is a per-state table.
struct TableExecute {
  Vector probabilities;
};

using ExecutionRule = std::variant<AlwaysExecute, BernoulliExecute, TableExecute>;

/// One linear-softmax coagent.
struct CoagentSpec {
  std::vector<InputSource> inputs;
  Vector output_values;  // the output space, in order
  ExecutionRule execution = AlwaysExecute{};

  std::size_t input_dim(const std::vector<CoagentSpec>& network) const;
  std::size_t num_outputs() const { return output_values.size(); }
};

/// Maps each non-unique parameter slot to the unique parameter it reads.
class SharingMap {
 public:
  SharingMap() = default;

  /// `assignment[y]` is the 0-based unique index for slot y. Throws
  /// ValidationError unless the assignment is onto {0..num_unique-1}.
  SharingMap(std::size_t num_unique, std::vector<std::size_t> assignment);

  static SharingMap identity(std::size_t n);

  std::size_t num_unique() const { return num_unique_; }
  std::size_t num_nonunique() const { return assignment_.size(); }
  std::size_t assignment(std::size_t slot) const { return assignment_[slot]; }
  const std::vector<std::size_t>& assignment() const { return assignment_; }

  /// g(x): the slots reading unique parameter x, ascending.
  const std::vector<std::size_t>& slots(std::size_t unique_index) const { return groups_[unique_index]; }

  bool is_identity() const;

  /// theta_nu[y] = theta_u[assignment(y)].
  Vector expand(std::span<const double> unique) const;

  /// out[x] = sum over y in g(x) of nonunique[y].
  Vector aggregate(std::span<const double> nonunique) const;

  /// Dense one-hot matrix, row-major num_unique x num_nonunique with
  /// H[x][y] = 1 iff assignment(y) == x.
  std::vector<Vector> dense_matrix() const;

 private:
  std::size_t num_unique_ = 0;
  std::vector<std::size_t> assignment_;
  std::vector<std::vector<std::size_t>> groups_;
};

struct DiscreteAssembler {
  std::size_t coagent = 0;  // its output index is the action
};

struct BinnedAssembler {
  std::vector<std::size_t> coagents;  // one per action dimension
};

using ActionAssembler = std::variant<DiscreteAssembler, BinnedAssembler>;

class NetworkTopology {
 public:
  NetworkTopology(std::size_t observation_dim, std::vector<CoagentSpec> coagents, ActionAssembler assembler,
                  std::shared_ptr<const SharingMap> sharing);

  std::size_t observation_dim() const { return observation_dim_; }
  std::size_t size() const { return coagents_.size(); }
  const CoagentSpec& coagent(std::size_t i) const { return coagents_[i]; }
  const std::vector<CoagentSpec>& coagents() const { return coagents_; }
  const ActionAssembler& assembler() const { return assembler_; }
  const SharingMap& sharing() const { return *sharing_; }
  std::shared_ptr<const SharingMap> sharing_ptr() const { return sharing_; }

  std::size_t input_dim(std::size_t i) const { return input_dims_[i]; }
  /// (input_dim + 1) * |outputs|.
  std::size_t param_count(std::size_t i) const { return param_counts_[i]; }
  std::size_t param_offset(std::size_t i) const { return param_offsets_[i]; }
  std::size_t num_nonunique() const { return param_offsets_.back(); }

  std::span<const double> coagent_params(std::span<const double> theta_nu, std::size_t i) const {
    return theta_nu.subspan(param_offsets_[i], param_counts_[i]);
  }

  /// Assembles X^i from the observation and the outputs of coagents < i.
  Vector gather_input(std::size_t i, std::span<const double> observation,
                      std::span<const std::size_t> outputs) const;

 private:
  std::size_t observation_dim_;
  std::vector<CoagentSpec> coagents_;
  ActionAssembler assembler_;
  std::shared_ptr<const SharingMap> sharing_;
  std::vector<std::size_t> input_dims_;
  std::vector<std::size_t> param_counts_;
  std::vector<std::size_t> param_offsets_;  // size m + 1
};

/// The unique parameter vector plus the map that expands it.
struct ParameterStore {
  Vector unique;
  std::shared_ptr<const SharingMap> sharing;

  Vector expand() const { return sharing->expand(unique); }
};

/// Output bins used for each continuous action dimension.
inline const Vector kDefaultActionBins = {-1.0, -0.32, -0.1, -0.032, -0.01, 0.0, 0.01, 0.032, 0.1, 0.32, 1.0};

/// Layered topology description, as read from an experiment config.
struct TopologyDescription {
  std::size_t observation_dim = 0;
  std::size_t hidden_units = 0;          // binary {-1,+1} coagents reading the observation
  bool action_sees_observation = false;  // forced on when there is no hidden layer
  bool discrete_actions = true;
  std::size_t action_size = 0;           // action count, or continuous dimension
  Vector action_bins = kDefaultActionBins;
  ExecutionRule hidden_execution = AlwaysExecute{};
  ExecutionRule action_execution = AlwaysExecute{};
  std::optional<std::vector<std::size_t>> sharing;  // 1-based unique index per slot
};

struct Network {
  NetworkTopology topology;
  ParameterStore store;
};

/// Validates wiring and sharing, and zero-initializes the parameters.
Network build_network(std::size_t observation_dim, std::vector<CoagentSpec> coagents, ActionAssembler assembler,
                      std::optional<SharingMap> sharing = std::nullopt);

Network build_network(const TopologyDescription& description);

/// Softmax over logits w_j . [x; 1], parameters laid out class-major.
Vector coagent_policy_probs(const CoagentSpec& coagent, std::span<const double> x, std::span<const double> params);

/// Pr(E = 1 | x) under a rule.
double execution_probability(const ExecutionRule& rule, std::span<const double> x);

/// E^i_t. Always true at t = 0.
bool sample_execution(const ExecutionRule& rule, std::span<const double> x, std::size_t t, Rng& rng);

/// Selected bin value per dimension.
Vector assemble_action(const std::vector<Vector>& bin_values, std::span<const std::size_t> chosen);

/// Environment action from the coagent outputs.
Action assemble_action(const NetworkTopology& topology, std::span<const std::size_t> outputs);

/// Random streams consumed by a network step.
struct StepStreams {
  Rng& policy;
  Rng& execution;
};

/// One feedforward pass at atomic time t. `held` holds the previous
/// outputs and is ignored at t = 0. The returned record has no reward.
AtomicStepRecord network_step(const NetworkTopology& topology, std::span<const double> theta_nu,
                              std::span<const double> observation, std::span<const std::size_t> held,
                              std::size_t t, StepStreams streams);

}  // namespace coagent
