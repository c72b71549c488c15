#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coagent/learning.hpp"
#include "coagent/mdp.hpp"
#include "coagent/network.hpp"

namespace coagent {

enum class Algorithm { kReinforce, kActorCritic };

/// Run settings parsed from a flat `key = value` file. Unknown keys are
/// rejected.
struct ExperimentConfig {
  std::string env = "chain2";  // or "none" for topology-only configs
  Algorithm algorithm = Algorithm::kActorCritic;
  Hyperparameters hyper;
  std::size_t trials = 1;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::size_t window = 1000;
  std::size_t threads = 1;
  bool normalize_obs = true;

  // topology
  std::size_t hidden_units = 0;
  bool action_sees_observation = false;
  std::size_t observation_dim = 0;  // 0 = take from the environment
  std::size_t action_dims = 0;      // 0 = take from the environment
  Vector action_bins = kDefaultActionBins;
  ExecutionRule hidden_execution = AlwaysExecute{};
  ExecutionRule action_execution = AlwaysExecute{};
  std::optional<std::vector<std::size_t>> sharing;

  /// Applies one `key = value` setting. Throws ValidationError naming the
  /// key on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  /// Range checks across all fields.
  void validate() const;

  /// Topology for the configured environment (or the explicit dimensions
  /// when env = none). Throws ValidationError on mismatches.
  TopologyDescription topology() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  Vector returns;                  // undiscounted, one per episode
  std::vector<std::size_t> steps;  // atomic steps per episode
  double seconds = 0.0;
};

/// Learning-curve and final statistics over a set of trials.
struct Summary {
  std::size_t trials = 0;
  std::size_t episodes = 0;
  std::size_t window = 0;
  Vector curve_mean;            // per episode, mean over trials of the moving average
  Vector curve_standard_error;
  double average_return = 0.0;       // mean over trials of the final-window mean
  double standard_error = 0.0;       // across trials
  double standard_deviation = 0.0;   // per-episode std across trials, averaged over the final window
};

/// Moving average over episodes max(0, k - window + 1) .. k.
Vector moving_average(std::span<const double> values, std::size_t window);

/// Throws InputError when window exceeds the episode count or trials
/// differ in length.
Summary summarize(const std::vector<Vector>& returns, std::size_t window);

std::string format_summary(const Summary& summary);
std::string format_curve(const Summary& summary);

/// One trial with seed base_seed + trial.
TrialResult run_trial(const ExperimentConfig& config, std::size_t trial);

struct ExperimentResult {
  std::vector<TrialResult> trials;
  Summary summary;
};

/// Runs every trial (concurrently up to config.threads) and, when
/// config.out is set, writes trial_NNNN.csv per trial plus summary.txt and
/// curve.csv.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string format_trial_csv(const TrialResult& trial);

/// Reads trial_*.csv files from a results directory.
std::vector<TrialResult> read_results(const std::filesystem::path& dir);

/// Summarizes a results directory. Never writes to it.
Summary summarize_directory(const std::filesystem::path& dir, std::size_t window);

/// Network size report for a config, without training.
std::string dry_run_report(const ExperimentConfig& config);

}  // namespace coagent
