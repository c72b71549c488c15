#include <cstdio>
#include <sstream>

#include "coagent/error.hpp"
#include "coagent/oracle.hpp"

namespace coagent {

const char* gradient_case_name(GradientCase c) {
  switch (c) {
    case GradientCase::kSynchronous: return "sync-no-sharing";
    case GradientCase::kSharedSynchronous: return "sync-tied-weight";
    case GradientCase::kSharedAsynchronous: return "async-tied-weight";
    case GradientCase::kThreeSlotSharing: return "two-unique-three-slot";
  }
  return "unknown";
}

namespace {

// hidden: [obs(2)] -> {-1,+1}, slots 0..5 (class-major, bias last)
// action: [hidden, obs(2)] -> {0,1}, slots 6..13
std::vector<CoagentSpec> two_layer_coagents(ExecutionRule hidden_rule) {
  return {
      CoagentSpec{{ObservationSlice{0, 2}}, {-1.0, 1.0}, hidden_rule},
      CoagentSpec{{UpstreamOutput{0}, ObservationSlice{0, 2}}, {0.0, 1.0}, AlwaysExecute{}},
  };
}

// ties the hidden class-0 bias (slot 2) to the action class-0 bias (slot 9)
SharingMap tied_bias_sharing() {
  std::vector<std::size_t> assignment;
  std::size_t next = 0;
  for (std::size_t y = 0; y < 14; ++y) assignment.push_back(y == 9 ? 2 : next++);
  return SharingMap(next, std::move(assignment));
}

}  // namespace

GradientInstance make_gradient_instance(GradientCase c, std::uint64_t seed) {
  Rng rng(seed, static_cast<std::uint64_t>(c), 17);
  const double gamma = rng.uniform(0.5, 1.0);
  const std::size_t horizon = 3;
  const std::size_t actions = c == GradientCase::kThreeSlotSharing ? 3 : 2;
  TabularModel model = random_tabular_model(rng, 2, actions, horizon, gamma);

  Network network = [&] {
    switch (c) {
      case GradientCase::kSynchronous:
        return build_network(2, two_layer_coagents(AlwaysExecute{}), DiscreteAssembler{1});
      case GradientCase::kSharedSynchronous:
        return build_network(2, two_layer_coagents(AlwaysExecute{}), DiscreteAssembler{1}, tied_bias_sharing());
      case GradientCase::kSharedAsynchronous:
        return build_network(2, two_layer_coagents(BernoulliExecute{0.5}), DiscreteAssembler{1}, tied_bias_sharing());
      case GradientCase::kThreeSlotSharing:
        return build_network(2, {CoagentSpec{{}, {0.0, 1.0, 2.0}, AlwaysExecute{}}}, DiscreteAssembler{0},
                             SharingMap(2, {0, 1, 1}));
    }
    throw InputError("unknown gradient case");
  }();
  for (double& theta : network.store.unique) theta = rng.uniform(-1.0, 1.0);
  return GradientInstance{std::move(model), std::move(network), horizon};
}

std::vector<GradientCheckRow> verify_gradients(std::size_t seeds, double tolerance) {
  std::vector<GradientCheckRow> rows;
  for (GradientCase c : {GradientCase::kSynchronous, GradientCase::kSharedSynchronous,
                         GradientCase::kSharedAsynchronous, GradientCase::kThreeSlotSharing}) {
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      const GradientInstance instance = make_gradient_instance(c, seed);
      const auto& topology = instance.network.topology;
      const Vector estimator =
          exact_estimator_expectation(instance.model, topology, instance.network.store.unique, instance.horizon);
      const Vector fd = finite_difference_gradient(
          [&](std::span<const double> theta) {
            return exact_objective(instance.model, topology, theta, instance.horizon);
          },
          instance.network.store.unique, 1e-5);
      GradientCheckRow row;
      row.name = gradient_case_name(c);
      row.seed = seed;
      row.max_relative_error = max_relative_error(estimator, fd);
      row.passed = row.max_relative_error <= tolerance;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string format_gradient_report(const std::vector<GradientCheckRow>& rows) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-24s %6s %14s  %s\n", "case", "seed", "max_rel_error", "result");
  out << line;
  std::size_t failures = 0;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %6llu %14.3e  %s\n", r.name.c_str(),
                  static_cast<unsigned long long>(r.seed), r.max_relative_error, r.passed ? "PASS" : "FAIL");
    out << line;
    if (!r.passed) ++failures;
  }
  out << (failures == 0 ? "all " : "") << rows.size() - failures << "/" << rows.size() << " cases passed\n";
  return out.str();
}

}  // namespace coagent
