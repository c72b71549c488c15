#include <cmath>
#include <set>

#include "coagent/error.hpp"
#include "coagent/network.hpp"
#include "doctest.h"

using namespace coagent;

namespace {

TopologyDescription ant_shape() {
  TopologyDescription d;
  d.observation_dim = 111;
  d.hidden_units = 32;
  d.discrete_actions = false;
  d.action_size = 8;
  return d;
}

Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("Ant-shaped topology parameter counts") {
  const Network net = build_network(ant_shape());
  const auto& topo = net.topology;
  REQUIRE(topo.size() == 40);
  for (std::size_t i = 0; i < 32; ++i) CHECK(topo.param_count(i) == 224);
  for (std::size_t i = 32; i < 40; ++i) {
    CHECK(topo.param_count(i) == 363);
    CHECK(topo.coagent(i).output_values == kDefaultActionBins);
  }
  CHECK(topo.num_nonunique() == 32 * 224 + 8 * 363);
  CHECK(net.store.unique.size() == 10072);
  for (double theta : net.store.unique) CHECK(theta == 0.0);
}

TEST_CASE("single coagent and tied pair parameter counts") {
  const Network single =
      build_network(2, {CoagentSpec{{ObservationSlice{0, 2}}, {0.0, 1.0}, AlwaysExecute{}}}, DiscreteAssembler{0});
  CHECK(single.topology.num_nonunique() == 6);
  CHECK(single.store.unique.size() == 6);

  std::vector<std::size_t> tie(12);
  for (std::size_t y = 0; y < 12; ++y) tie[y] = y % 6;
  const CoagentSpec spec{{ObservationSlice{0, 2}}, {0.0, 1.0}, AlwaysExecute{}};
  const Network tied = build_network(2, {spec, spec}, DiscreteAssembler{1}, SharingMap(6, tie));
  CHECK(tied.topology.num_nonunique() == 12);
  CHECK(tied.store.unique.size() == 6);
  // 1-based g(1) = {1, 7}
  CHECK(tied.topology.sharing().slots(0) == std::vector<std::size_t>{0, 6});
  std::set<std::size_t> covered;
  for (std::size_t x = 0; x < 6; ++x) {
    for (std::size_t y : tied.topology.sharing().slots(x)) CHECK(covered.insert(y).second);
  }
  CHECK(covered.size() == 12);
}

TEST_CASE("build_network rejects bad wiring and sharing") {
  const CoagentSpec forward{{UpstreamOutput{1}}, {0.0, 1.0}, AlwaysExecute{}};
  const CoagentSpec plain{{ObservationSlice{0, 1}}, {0.0, 1.0}, AlwaysExecute{}};
  CHECK_THROWS_AS(build_network(1, {forward, plain}, DiscreteAssembler{1}), ValidationError);
  const CoagentSpec self{{UpstreamOutput{0}}, {0.0, 1.0}, AlwaysExecute{}};
  CHECK_THROWS_AS(build_network(1, {self}, DiscreteAssembler{0}), ValidationError);
  // unique parameter 2 never used
  CHECK_THROWS_AS(SharingMap(3, {0, 0, 2, 2}), ValidationError);
  CHECK_THROWS_AS(SharingMap(2, {0, 5}), ValidationError);
  // sharing covers the wrong number of slots
  CHECK_THROWS_AS(build_network(1, {plain}, DiscreteAssembler{0}, SharingMap::identity(3)), ValidationError);
  const CoagentSpec bad_slice{{ObservationSlice{0, 3}}, {0.0, 1.0}, AlwaysExecute{}};
  CHECK_THROWS_AS(build_network(2, {bad_slice}, DiscreteAssembler{0}), ValidationError);
  const CoagentSpec bad_rule{{ObservationSlice{0, 1}}, {0.0, 1.0}, BernoulliExecute{1.5}};
  CHECK_THROWS_AS(build_network(1, {bad_rule}, DiscreteAssembler{0}), ValidationError);
}

TEST_CASE("expand_parameters") {
  const SharingMap identity = SharingMap::identity(4);
  const Vector theta = {0.5, -1.0, 2.0, 3.5};
  CHECK(identity.expand(theta) == theta);

  const SharingMap tied(2, {0, 1, 1});
  CHECK(tied.expand(Vector{0.25, -4.0}) == Vector{0.25, -4.0, -4.0});

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> assignment = {0, 1, 2};
    for (int k = 0; k < 5; ++k) assignment.push_back(rng.next() % 3);
    const SharingMap map(3, assignment);
    const Vector unique = random_vector(rng, 3);
    const Vector expanded = map.expand(unique);
    for (std::size_t y = 0; y < 8; ++y) CHECK(expanded[y] == unique[assignment[y]]);
    for (std::size_t x = 0; x < 3; ++x) {
      for (std::size_t y : map.slots(x)) CHECK(expanded[y] == unique[x]);
    }
  }
}

TEST_CASE("g-sum aggregation equals the dense one-hot product") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_u = 1 + rng.next() % 6;
    const std::size_t n_nu = n_u + rng.next() % 10;
    std::vector<std::size_t> assignment(n_nu);
    for (std::size_t y = 0; y < n_nu; ++y) assignment[y] = y < n_u ? y : rng.next() % n_u;
    const SharingMap map(n_u, assignment);
    const Vector v = random_vector(rng, n_nu, 10.0);
    const auto h = map.dense_matrix();
    Vector dense(n_u, 0.0);
    for (std::size_t x = 0; x < n_u; ++x) {
      for (std::size_t y = 0; y < n_nu; ++y) dense[x] += v[y] * h[x][y];
    }
    // the one-hot product adds exact zeros, so the two agree bit for bit
    CHECK(map.aggregate(v) == dense);
  }
}

TEST_CASE("coagent_policy_probs examples") {
  const CoagentSpec eleven{{ObservationSlice{0, 3}}, kDefaultActionBins, AlwaysExecute{}};
  const Vector zeros(4 * 11, 0.0);
  const Vector probs = coagent_policy_probs(eleven, Vector{0.3, -2.0, 7.0}, zeros);
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / 11.0).epsilon(1e-15));

  const CoagentSpec binary{{ObservationSlice{0, 1}}, {-1.0, 1.0}, AlwaysExecute{}};
  // logits w.[x;1] = 0.5*2 + 0 = 1 vs 0.5*2 - 1 = 0  -> difference 1
  const Vector w = {0.5, 0.0, 0.5, -1.0};
  const Vector p = coagent_policy_probs(binary, Vector{2.0}, w);
  CHECK(p[0] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.2689414213699951).epsilon(1e-15));
  // equal logits
  const Vector half = coagent_policy_probs(binary, Vector{1.0}, Vector{1.0, 0.0, 0.0, 1.0});
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);

  CHECK_THROWS_AS(coagent_policy_probs(binary, Vector{1.0, 2.0}, w), InputError);
}

TEST_CASE("coagent_policy_probs normalizes for random instances") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = rng.next() % 6;
    const std::size_t k = 1 + rng.next() % 11;
    CoagentSpec spec{{ObservationSlice{0, d}}, Vector(k, 0.0), AlwaysExecute{}};
    const Vector probs = coagent_policy_probs(spec, random_vector(rng, d, 3.0), random_vector(rng, (d + 1) * k, 20.0));
    double total = 0.0;
    for (double p : probs) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("sample_execution") {
  Rng rng(6);
  const Vector x = {1.0};
  for (std::size_t t = 0; t < 10; ++t) CHECK(sample_execution(AlwaysExecute{}, x, t, rng));
  CHECK(sample_execution(BernoulliExecute{0.0}, x, 0, rng));
  for (std::size_t t = 1; t < 100; ++t) CHECK_FALSE(sample_execution(BernoulliExecute{0.0}, x, t, rng));

  std::size_t hits = 0;
  constexpr std::size_t kDraws = 100000;
  for (std::size_t n = 0; n < kDraws; ++n) hits += sample_execution(BernoulliExecute{0.5}, x, 1, rng) ? 1 : 0;
  const double freq = static_cast<double>(hits) / kDraws;
  CHECK(freq >= 0.494);
  CHECK(freq <= 0.506);

  const TableExecute table{{0.0, 1.0}};
  CHECK(execution_probability(table, Vector{0.0, 1.0}) == 1.0);
  CHECK(execution_probability(table, Vector{1.0, 0.0}) == 0.0);
  CHECK_FALSE(sample_execution(table, Vector{1.0, 0.0}, 5, rng));
}

TEST_CASE("assemble_action") {
  const std::vector<Vector> bins = {kDefaultActionBins, kDefaultActionBins};
  const std::size_t mid[] = {5, 5};
  CHECK(assemble_action(bins, mid) == Vector{0.0, 0.0});
  const std::size_t ends[] = {0, 10};
  CHECK(assemble_action(bins, ends) == Vector{-1.0, 1.0});
  const std::vector<Vector> single = {{0.7}, {-0.2}};
  const std::size_t zero[] = {0, 0};
  CHECK(assemble_action(single, zero) == Vector{0.7, -0.2});
  const std::size_t bad[] = {0, 11};
  CHECK_THROWS_AS(assemble_action(bins, bad), InputError);
}

TEST_CASE("network_step action distribution matches the coagent softmax") {
  Network net =
      build_network(2, {CoagentSpec{{ObservationSlice{0, 2}}, {0.0, 1.0, 2.0}, AlwaysExecute{}}}, DiscreteAssembler{0});
  Rng init(8);
  net.store.unique = random_vector(init, 9);
  const Vector theta_nu = net.store.expand();
  const Vector obs = {0.0, 1.0};
  const Vector expected = coagent_policy_probs(net.topology.coagent(0), obs, theta_nu);
  Rng policy(9);
  Rng exec(10);
  Vector counts(3, 0.0);
  constexpr std::size_t kSamples = 100000;
  for (std::size_t n = 0; n < kSamples; ++n) {
    const auto record = network_step(net.topology, theta_nu, obs, {}, 0, {policy, exec});
    CHECK(record.executed[0] == 1);
    counts[std::get<std::size_t>(record.action)] += 1.0;
  }
  for (std::size_t a = 0; a < 3; ++a) {
    const double se = std::sqrt(expected[a] * (1 - expected[a]) / kSamples);
    CHECK(std::abs(counts[a] / kSamples - expected[a]) <= 3.0 * se);
  }
}

TEST_CASE("network_step holds outputs of non-executing coagents") {
  const std::vector<CoagentSpec> coagents = {
      CoagentSpec{{ObservationSlice{0, 2}}, {-1.0, 1.0}, BernoulliExecute{0.0}},
      CoagentSpec{{UpstreamOutput{0}}, {0.0, 1.0}, AlwaysExecute{}},
  };
  Network net = build_network(2, coagents, DiscreteAssembler{1});
  Rng init(1);
  net.store.unique = random_vector(init, net.store.unique.size());
  const Vector theta_nu = net.store.expand();
  Rng policy(2);
  Rng exec(3);
  Trajectory tr;
  std::vector<std::size_t> held;
  for (std::size_t t = 0; t < 50; ++t) {
    const Vector obs = t % 2 ? Vector{1.0, 0.0} : Vector{0.0, 1.0};
    auto record = network_step(net.topology, theta_nu, obs, held, t, {policy, exec});
    CHECK(record.executed[0] == (t == 0 ? 1 : 0));
    held = record.outputs;
    tr.steps.push_back(std::move(record));
  }
  for (const auto& step : tr.steps) CHECK(step.outputs[0] == tr.steps.front().outputs[0]);
  CHECK(satisfies_hold_semantics(tr));
}

TEST_CASE("synchronous networks execute every coagent every step") {
  TopologyDescription d;
  d.observation_dim = 3;
  d.hidden_units = 4;
  d.discrete_actions = true;
  d.action_size = 2;
  Network net = build_network(d);
  Rng init(4);
  net.store.unique = random_vector(init, net.store.unique.size());
  const Vector theta_nu = net.store.expand();
  Rng policy(5);
  Rng exec(6);
  const Rng exec_before = exec;
  std::vector<std::size_t> held;
  for (std::size_t t = 0; t < 100; ++t) {
    const auto record = network_step(net.topology, theta_nu, random_vector(init, 3), held, t, {policy, exec});
    for (auto e : record.executed) CHECK(e == 1);
    held = record.outputs;
  }
  // the execution stream is untouched in synchronous mode
  Rng a = exec;
  Rng b = exec_before;
  CHECK(a.next() == b.next());
}

TEST_CASE("Ant-shaped second layer sees 32 inputs in {-1, +1}") {
  Network net = build_network(ant_shape());
  Rng rng(12);
  net.store.unique = random_vector(rng, net.store.unique.size(), 0.1);
  const Vector theta_nu = net.store.expand();
  Rng policy(13);
  Rng exec(14);
  std::vector<std::size_t> held;
  for (std::size_t t = 0; t < 5; ++t) {
    const auto record = network_step(net.topology, theta_nu, random_vector(rng, 111), held, t, {policy, exec});
    for (std::size_t i = 32; i < 40; ++i) {
      REQUIRE(record.inputs[i].size() == 32);
      for (double v : record.inputs[i]) CHECK((v == -1.0 || v == 1.0));
    }
    const auto& action = std::get<Vector>(record.action);
    REQUIRE(action.size() == 8);
    for (double a : action) {
      CHECK(std::find(kDefaultActionBins.begin(), kDefaultActionBins.end(), a) != kDefaultActionBins.end());
    }
    held = record.outputs;
  }
}

TEST_CASE("inputs depend only on the observation and upstream outputs") {
  const std::vector<CoagentSpec> coagents = {
      CoagentSpec{{ObservationSlice{1, 1}}, {-1.0, 1.0}, AlwaysExecute{}},
      CoagentSpec{{UpstreamOutput{0}, ObservationSlice{0, 2}}, {0.0, 1.0}, AlwaysExecute{}},
  };
  const Network net = build_network(2, coagents, DiscreteAssembler{1});
  const std::size_t outputs[] = {1, 0};
  CHECK(net.topology.gather_input(0, Vector{3.0, 4.0}, outputs) == Vector{4.0});
  CHECK(net.topology.gather_input(1, Vector{3.0, 4.0}, outputs) == Vector{1.0, 3.0, 4.0});
}
