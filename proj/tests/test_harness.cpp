#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coagent/error.hpp"
#include "coagent/harness.hpp"
#include "coagent/oracle.hpp"
#include "doctest.h"

using namespace coagent;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("coagent_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config parsing") {
  const auto config = parse_config(
      "# comment\n"
      "env = pointmass\n"
      "algorithm = reinforce\n"
      "trials = 3   # trailing comment\n"
      "actor_lr = 0.01\n"
      "lambda_actor = 0.5\n"
      "batch_actor = 16\n"
      "hidden_execution = bernoulli:0.25\n"
      "sharing = none\n");
  CHECK(config.env == "pointmass");
  CHECK(config.algorithm == Algorithm::kReinforce);
  CHECK(config.trials == 3);
  CHECK(config.hyper.actor_lr == 0.01);
  CHECK(config.hyper.lambda_actor == 0.5);
  CHECK(config.hyper.batch_actor == 16);
  CHECK(std::get<BernoulliExecute>(config.hidden_execution).probability == 0.25);
  CHECK_FALSE(config.sharing.has_value());
  // untouched hyperparameters keep their defaults
  CHECK(config.hyper.critic_lr == 0.00018759145359217475);
  CHECK(config.hyper.gamma == 0.9679813850692468);
  CHECK(config.hyper.critic_beta2 == 0.9999975597793732);
}

TEST_CASE("config errors name the offending field") {
  CHECK(error_of("actor_learning_rate = 0.1\n").find("actor_learning_rate") != std::string::npos);
  CHECK(error_of("trials = 0\n").find("trials") != std::string::npos);
  CHECK(error_of("window = 0\n").find("window") != std::string::npos);
  CHECK(error_of("gamma = 1.5\n").find("gamma") != std::string::npos);
  CHECK(error_of("episodes = ten\n").find("episodes") != std::string::npos);
  CHECK(error_of("algorithm = ppo\n").find("algorithm") != std::string::npos);
  CHECK(error_of("hidden_execution = sometimes\n").find("hidden_execution") != std::string::npos);
  CHECK(error_of("seed = 1\nseed = 2\n").find("seed") != std::string::npos);
  CHECK(error_of("just some text\n").find("line 1") != std::string::npos);
}

TEST_CASE("environment and topology mismatches are rejected") {
  auto config = parse_config("env = chain2\nobservation_dim = 3\n");
  CHECK_THROWS_WITH_AS(config.topology(), doctest::Contains("observation_dim"), ValidationError);
  config = parse_config("env = chain2\naction_dims = 2\n");
  CHECK_THROWS_AS(config.topology(), ValidationError);
  config = parse_config("env = chain2\nsharing = 1, 2\n");
  CHECK_THROWS_AS(run_experiment(config), ValidationError);
  config = parse_config("env = none\n");
  CHECK_THROWS_AS(config.topology(), ValidationError);
}

TEST_CASE("dry run of the Ant-shaped topology") {
  const auto config = parse_config(
      "env = none\nobservation_dim = 111\naction_dims = 8\nhidden_units = 32\n");
  const std::string report = dry_run_report(config);
  CHECK(report.find("coagents = 40\n") != std::string::npos);
  CHECK(report.find("nonunique_parameters = 10072\n") != std::string::npos);
  CHECK(report.find("layer 1 = 32 coagents x 224 parameters") != std::string::npos);
  CHECK(report.find("layer 2 = 8 coagents x 363 parameters") != std::string::npos);
}

TEST_CASE("moving average uses exactly the trailing window") {
  Rng rng(41);
  Vector values(57);
  for (double& v : values) v = rng.uniform(-3, 3);
  for (std::size_t w : {1u, 2u, 7u, 57u, 100u}) {
    const Vector ma = moving_average(values, w);
    for (std::size_t k = 0; k < values.size(); ++k) {
      const std::size_t first = k + 1 >= w ? k + 1 - w : 0;
      double total = 0.0;
      for (std::size_t j = first; j <= k; ++j) total += values[j];
      CHECK(ma[k] == doctest::Approx(total / static_cast<double>(k - first + 1)).epsilon(1e-14));
    }
  }
  CHECK(moving_average(values, 1) == values);
}

TEST_CASE("summarize examples") {
  SUBCASE("constant returns") {
    const Summary s = summarize({Vector(20, 2.5), Vector(20, 2.5), Vector(20, 2.5)}, 5);
    CHECK(s.average_return == 2.5);
    CHECK(s.standard_error == 0.0);
    CHECK(s.standard_deviation == 0.0);
  }
  SUBCASE("two trials with final-window means 1 and 3") {
    const Summary s = summarize({Vector(10, 1.0), Vector(10, 3.0)}, 4);
    CHECK(s.average_return == 2.0);
    CHECK(s.standard_error == 1.0);
    for (double se : s.curve_standard_error) CHECK(se == 1.0);
  }
  SUBCASE("window 1 keeps the raw curve") {
    const Vector a = {1, 5, 2, 8};
    const Vector b = {3, 1, 4, 0};
    const Summary s = summarize({a, b}, 1);
    CHECK(s.curve_mean == Vector{2, 3, 3, 4});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(summarize({Vector(3, 1.0)}, 4), InputError);
    CHECK_THROWS_AS(summarize({Vector(3, 1.0), Vector(4, 1.0)}, 2), InputError);
  }
}

TEST_CASE("summarize_directory reads trial files without touching them") {
  const fs::path dir = scratch_dir("summarize");
  fs::create_directories(dir);
  write_file(dir / "trial_0000.csv", "trial,episode,return,steps\n0,0,1,3\n0,1,2,3\n0,2,3,3\n");
  write_file(dir / "trial_0001.csv", "trial,episode,return,steps\n1,0,3,3\n1,1,4,3\n1,2,5,3\n");
  const std::string before = read_file(dir / "trial_0000.csv");
  const Summary s = summarize_directory(dir, 2);
  CHECK(s.trials == 2);
  CHECK(s.average_return == 3.5);
  CHECK(read_file(dir / "trial_0000.csv") == before);
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 2);

  write_file(dir / "trial_0002.csv", "trial,episode,return\n");
  CHECK_THROWS_AS(summarize_directory(dir, 2), IoError);
  CHECK_THROWS_AS(summarize_directory(dir / "missing", 2), IoError);
  fs::remove_all(dir);
}

TEST_CASE("experiments are byte-for-byte reproducible") {
  const std::string text =
      "env = chain2\nalgorithm = actor_critic\nhidden_units = 2\ntrials = 2\nepisodes = 40\nwindow = 10\n"
      "seed = 9\nhidden_execution = bernoulli:0.5\nbatch_actor = 8\nbatch_critic = 4\n";
  auto config = parse_config(text);
  const fs::path first = scratch_dir("repro_a");
  const fs::path second = scratch_dir("repro_b");
  config.out = first;
  run_experiment(config);
  config.out = second;
  run_experiment(config);
  for (const char* name : {"trial_0000.csv", "trial_0001.csv", "summary.txt", "curve.csv"}) {
    const std::string a = read_file(first / name);
    const std::string b = read_file(second / name);
    CHECK(!a.empty());
    CHECK(a == b);
  }
  fs::remove_all(first);
  fs::remove_all(second);
}

TEST_CASE("trial results do not depend on execution order") {
  auto config = parse_config(
      "env = gridworld5\nalgorithm = reinforce\nhidden_units = 2\ntrials = 3\nepisodes = 5\nwindow = 1\nseed = 4\n");
  const auto sequential = run_experiment(config);
  config.threads = 3;
  const auto parallel = run_experiment(config);
  const TrialResult alone = run_trial(config, 2);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(format_trial_csv(sequential.trials[t]) == format_trial_csv(parallel.trials[t]));
  }
  CHECK(format_trial_csv(alone) == format_trial_csv(sequential.trials[2]));
  CHECK(sequential.trials[2].seed == 6);
}

TEST_CASE("REINFORCE on chain2 beats the uniform policy") {
  // uniform single-coagent policy, undiscounted, by enumeration
  const Network uniform = build_network(parse_config("env = chain2\n").topology());
  const double uniform_mean = exact_objective(chain2_model(3, 1.0), uniform.topology, uniform.store.unique, 3);
  CHECK(uniform_mean == doctest::Approx(1.5).epsilon(1e-15));

  const auto config = parse_config(
      "env = chain2\nalgorithm = reinforce\nhidden_units = 0\ntrials = 1\nepisodes = 500\nwindow = 100\nseed = 3\n");
  const auto result = run_experiment(config);
  const auto& returns = result.trials[0].returns;
  double final_mean = 0.0;
  for (std::size_t k = returns.size() - 100; k < returns.size(); ++k) final_mean += returns[k];
  final_mean /= 100.0;
  CHECK(final_mean > uniform_mean);
  CHECK(result.summary.average_return == doctest::Approx(final_mean).epsilon(1e-14));
}
