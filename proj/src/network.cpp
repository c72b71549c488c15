#include "coagent/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coagent/error.hpp"

namespace coagent {

std::size_t CoagentSpec::input_dim(const std::vector<CoagentSpec>& /*network*/) const {
  std::size_t dim = 0;
  for (const auto& source : inputs) {
    if (const auto* slice = std::get_if<ObservationSlice>(&source)) {
      dim += slice->length;
    } else {
      dim += 1;
    }
  }
  return dim;
}

SharingMap::SharingMap(std::size_t num_unique, std::vector<std::size_t> assignment)
    : num_unique_(num_unique), assignment_(std::move(assignment)), groups_(num_unique) {
  if (num_unique_ > assignment_.size()) {
    throw ValidationError("sharing: more unique parameters than non-unique slots");
  }
  for (std::size_t y = 0; y < assignment_.size(); ++y) {
    if (assignment_[y] >= num_unique_) {
      throw ValidationError("sharing: slot " + std::to_string(y + 1) + " maps outside the unique range");
    }
    groups_[assignment_[y]].push_back(y);
  }
  for (std::size_t x = 0; x < num_unique_; ++x) {
    if (groups_[x].empty()) {
      throw ValidationError("sharing: unique parameter " + std::to_string(x + 1) + " is never used");
    }
  }
}

SharingMap SharingMap::identity(std::size_t n) {
  std::vector<std::size_t> assignment(n);
  for (std::size_t y = 0; y < n; ++y) assignment[y] = y;
  return SharingMap(n, std::move(assignment));
}

bool SharingMap::is_identity() const {
  if (num_unique_ != assignment_.size()) return false;
  for (std::size_t y = 0; y < assignment_.size(); ++y) {
    if (assignment_[y] != y) return false;
  }
  return true;
}

Vector SharingMap::expand(std::span<const double> unique) const {
  if (unique.size() != num_unique_) throw InputError("expand: unique vector has wrong length");
  Vector out(assignment_.size());
  for (std::size_t y = 0; y < assignment_.size(); ++y) out[y] = unique[assignment_[y]];
  return out;
}

Vector SharingMap::aggregate(std::span<const double> nonunique) const {
  if (nonunique.size() != assignment_.size()) throw InputError("aggregate: non-unique vector has wrong length");
  Vector out(num_unique_, 0.0);
  for (std::size_t x = 0; x < num_unique_; ++x) {
    double total = 0.0;
    for (std::size_t y : groups_[x]) total += nonunique[y];
    out[x] = total;
  }
  return out;
}

std::vector<Vector> SharingMap::dense_matrix() const {
  std::vector<Vector> h(num_unique_, Vector(assignment_.size(), 0.0));
  for (std::size_t y = 0; y < assignment_.size(); ++y) h[assignment_[y]][y] = 1.0;
  return h;
}

namespace {

void validate_rule(const ExecutionRule& rule, std::size_t input_dim, std::size_t i) {
  const std::string where = "coagent " + std::to_string(i + 1) + ": ";
  if (const auto* b = std::get_if<BernoulliExecute>(&rule)) {
    if (!(b->probability >= 0.0 && b->probability <= 1.0)) {
      throw ValidationError(where + "execution probability outside [0,1]");
    }
  } else if (const auto* table = std::get_if<TableExecute>(&rule)) {
    if (table->probabilities.size() != input_dim) {
      throw ValidationError(where + "execution table size must equal the input dimension");
    }
    for (double p : table->probabilities) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(where + "execution probability outside [0,1]");
    }
  }
}

}  // namespace

NetworkTopology::NetworkTopology(std::size_t observation_dim, std::vector<CoagentSpec> coagents,
                                 ActionAssembler assembler, std::shared_ptr<const SharingMap> sharing)
    : observation_dim_(observation_dim),
      coagents_(std::move(coagents)),
      assembler_(std::move(assembler)),
      sharing_(std::move(sharing)) {
  if (coagents_.empty()) throw ValidationError("network has no coagents");
  param_offsets_.push_back(0);
  for (std::size_t i = 0; i < coagents_.size(); ++i) {
    const auto& c = coagents_[i];
    const std::string where = "coagent " + std::to_string(i + 1) + ": ";
    if (c.output_values.empty()) throw ValidationError(where + "empty output space");
    for (const auto& source : c.inputs) {
      if (const auto* slice = std::get_if<ObservationSlice>(&source)) {
        if (slice->begin + slice->length > observation_dim_) {
          throw ValidationError(where + "observation slice exceeds the observation dimension");
        }
      } else if (std::get<UpstreamOutput>(source).coagent >= i) {
        throw ValidationError(where + "input from coagent " +
                              std::to_string(std::get<UpstreamOutput>(source).coagent + 1) +
                              " is not upstream (wiring must be feedforward)");
      }
    }
    const std::size_t dim = c.input_dim(coagents_);
    validate_rule(c.execution, dim, i);
    input_dims_.push_back(dim);
    param_counts_.push_back((dim + 1) * c.num_outputs());
    param_offsets_.push_back(param_offsets_.back() + param_counts_.back());
  }
  auto check_index = [&](std::size_t index) {
    if (index >= coagents_.size()) throw ValidationError("action assembler references a missing coagent");
  };
  if (const auto* d = std::get_if<DiscreteAssembler>(&assembler_)) {
    check_index(d->coagent);
  } else {
    const auto& b = std::get<BinnedAssembler>(assembler_);
    if (b.coagents.empty()) throw ValidationError("action assembler has no dimensions");
    for (std::size_t index : b.coagents) check_index(index);
  }
  if (!sharing_) throw ValidationError("network has no sharing map");
  if (sharing_->num_nonunique() != num_nonunique()) {
    throw ValidationError("sharing assignment covers " + std::to_string(sharing_->num_nonunique()) +
                          " slots but the network has " + std::to_string(num_nonunique()) + " parameters");
  }
}

Vector NetworkTopology::gather_input(std::size_t i, std::span<const double> observation,
                                     std::span<const std::size_t> outputs) const {
  if (observation.size() != observation_dim_) throw InputError("observation has the wrong dimension");
  Vector x;
  x.reserve(input_dims_[i]);
  for (const auto& source : coagents_[i].inputs) {
    if (const auto* slice = std::get_if<ObservationSlice>(&source)) {
      x.insert(x.end(), observation.begin() + static_cast<std::ptrdiff_t>(slice->begin),
               observation.begin() + static_cast<std::ptrdiff_t>(slice->begin + slice->length));
    } else {
      const std::size_t j = std::get<UpstreamOutput>(source).coagent;
      x.push_back(coagents_[j].output_values[outputs[j]]);
    }
  }
  return x;
}

Network build_network(std::size_t observation_dim, std::vector<CoagentSpec> coagents, ActionAssembler assembler,
                      std::optional<SharingMap> sharing) {
  // parameter count is needed before the sharing map can be checked
  std::size_t total = 0;
  for (const auto& c : coagents) total += (c.input_dim(coagents) + 1) * c.num_outputs();
  auto map = std::make_shared<const SharingMap>(sharing ? std::move(*sharing) : SharingMap::identity(total));
  NetworkTopology topology(observation_dim, std::move(coagents), std::move(assembler), map);
  ParameterStore store{Vector(map->num_unique(), 0.0), map};
  return Network{std::move(topology), std::move(store)};
}

Network build_network(const TopologyDescription& d) {
  if (d.observation_dim == 0) throw ValidationError("observation_dim must be positive");
  if (d.action_size == 0) throw ValidationError("action size must be positive");
  std::vector<CoagentSpec> coagents;
  for (std::size_t h = 0; h < d.hidden_units; ++h) {
    coagents.push_back({{ObservationSlice{0, d.observation_dim}}, {-1.0, 1.0}, d.hidden_execution});
  }
  std::vector<InputSource> action_inputs;
  for (std::size_t h = 0; h < d.hidden_units; ++h) action_inputs.push_back(UpstreamOutput{h});
  if (d.action_sees_observation || d.hidden_units == 0) {
    action_inputs.push_back(ObservationSlice{0, d.observation_dim});
  }
  ActionAssembler assembler;
  if (d.discrete_actions) {
    Vector values(d.action_size);
    for (std::size_t a = 0; a < d.action_size; ++a) values[a] = static_cast<double>(a);
    coagents.push_back({action_inputs, values, d.action_execution});
    assembler = DiscreteAssembler{coagents.size() - 1};
  } else {
    if (d.action_bins.empty()) throw ValidationError("action_bins must not be empty");
    BinnedAssembler binned;
    for (std::size_t k = 0; k < d.action_size; ++k) {
      coagents.push_back({action_inputs, d.action_bins, d.action_execution});
      binned.coagents.push_back(coagents.size() - 1);
    }
    assembler = binned;
  }
  std::optional<SharingMap> sharing;
  if (d.sharing) {
    std::vector<std::size_t> assignment;
    std::size_t num_unique = 0;
    for (std::size_t y = 0; y < d.sharing->size(); ++y) {
      const std::size_t index = (*d.sharing)[y];
      if (index == 0) throw ValidationError("sharing: unique indices are 1-based (slot " + std::to_string(y + 1) + ")");
      assignment.push_back(index - 1);
      num_unique = std::max(num_unique, index);
    }
    sharing = SharingMap(num_unique, std::move(assignment));
  }
  return build_network(d.observation_dim, std::move(coagents), std::move(assembler), std::move(sharing));
}

Vector coagent_policy_probs(const CoagentSpec& coagent, std::span<const double> x, std::span<const double> params) {
  const std::size_t classes = coagent.num_outputs();
  const std::size_t width = x.size() + 1;
  if (params.size() != width * classes) throw InputError("coagent_policy_probs: parameter/input dimension mismatch");
  Vector probs(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    const double* w = params.data() + j * width;
    double logit = w[x.size()];
    for (std::size_t k = 0; k < x.size(); ++k) logit += w[k] * x[k];
    probs[j] = logit;
  }
  const double shift = *std::max_element(probs.begin(), probs.end());
  double total = 0.0;
  for (double& p : probs) {
    p = std::exp(p - shift);
    total += p;
  }
  for (double& p : probs) p /= total;
  return probs;
}

double execution_probability(const ExecutionRule& rule, std::span<const double> x) {
  if (std::holds_alternative<AlwaysExecute>(rule)) return 1.0;
  if (const auto* b = std::get_if<BernoulliExecute>(&rule)) return b->probability;
  const auto& table = std::get<TableExecute>(rule);
  if (x.size() != table.probabilities.size()) throw InputError("execution table: input dimension mismatch");
  const auto position = std::max_element(x.begin(), x.end()) - x.begin();
  return table.probabilities[static_cast<std::size_t>(position)];
}

bool sample_execution(const ExecutionRule& rule, std::span<const double> x, std::size_t t, Rng& rng) {
  if (t == 0 || std::holds_alternative<AlwaysExecute>(rule)) return true;
  return rng.bernoulli(execution_probability(rule, x));
}

Vector assemble_action(const std::vector<Vector>& bin_values, std::span<const std::size_t> chosen) {
  if (bin_values.size() != chosen.size()) throw InputError("assemble_action: dimension count mismatch");
  Vector action(chosen.size());
  for (std::size_t d = 0; d < chosen.size(); ++d) {
    if (chosen[d] >= bin_values[d].size()) throw InputError("assemble_action: bin index out of range");
    action[d] = bin_values[d][chosen[d]];
  }
  return action;
}

Action assemble_action(const NetworkTopology& topology, std::span<const std::size_t> outputs) {
  if (const auto* d = std::get_if<DiscreteAssembler>(&topology.assembler())) return outputs[d->coagent];
  const auto& binned = std::get<BinnedAssembler>(topology.assembler());
  Vector action(binned.coagents.size());
  for (std::size_t k = 0; k < binned.coagents.size(); ++k) {
    const std::size_t i = binned.coagents[k];
    action[k] = topology.coagent(i).output_values[outputs[i]];
  }
  return action;
}

AtomicStepRecord network_step(const NetworkTopology& topology, std::span<const double> theta_nu,
                              std::span<const double> observation, std::span<const std::size_t> held,
                              std::size_t t, StepStreams streams) {
  const std::size_t m = topology.size();
  if (theta_nu.size() != topology.num_nonunique()) throw InputError("network_step: parameter vector has wrong length");
  if (t > 0 && held.size() != m) throw InputError("network_step: held outputs missing");
  AtomicStepRecord record;
  record.observation.assign(observation.begin(), observation.end());
  record.executed.assign(m, 0);
  record.inputs.resize(m);
  record.outputs.assign(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& spec = topology.coagent(i);
    record.inputs[i] = topology.gather_input(i, observation, record.outputs);
    const bool executes = sample_execution(spec.execution, record.inputs[i], t, streams.execution);
    record.executed[i] = executes ? 1 : 0;
    if (executes) {
      const Vector probs = coagent_policy_probs(spec, record.inputs[i], topology.coagent_params(theta_nu, i));
      record.outputs[i] = streams.policy.categorical(probs);
    } else {
      record.outputs[i] = held[i];
    }
  }
  record.action = assemble_action(topology, record.outputs);
  return record;
}

}  // namespace coagent
