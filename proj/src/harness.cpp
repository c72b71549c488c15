#include "coagent/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "coagent/error.hpp"

namespace coagent {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string current;
  std::istringstream in(s);
  while (std::getline(in, current, sep)) parts.push_back(trim(current));
  return parts;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ValidationError(key + ": expected a number, got '" + value + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError(key + ": expected true or false, got '" + value + "'");
}

Vector parse_list(const std::string& key, const std::string& value) {
  Vector out;
  for (const auto& part : split(value, ',')) out.push_back(parse_double(key, part));
  return out;
}

ExecutionRule parse_execution(const std::string& key, const std::string& value) {
  if (value == "always") return AlwaysExecute{};
  const auto colon = value.find(':');
  const std::string kind = trim(value.substr(0, colon));
  const std::string arg = colon == std::string::npos ? std::string() : trim(value.substr(colon + 1));
  if (kind == "bernoulli" && !arg.empty()) return BernoulliExecute{parse_double(key, arg)};
  if (kind == "table" && !arg.empty()) return TableExecute{parse_list(key, arg)};
  throw ValidationError(key + ": expected always, bernoulli:<p> or table:<p1,p2,...>, got '" + value + "'");
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << contents;
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + ": " + ec.message());
}

std::string trial_filename(std::size_t trial) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%04zu.csv", trial);
  return buf;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto count = [&] { return static_cast<std::size_t>(parse_unsigned(key, value)); };
  if (key == "env") {
    env = value;
  } else if (key == "algorithm") {
    if (value == "reinforce") {
      algorithm = Algorithm::kReinforce;
    } else if (value == "actor_critic") {
      algorithm = Algorithm::kActorCritic;
    } else {
      throw ValidationError("algorithm: expected reinforce or actor_critic, got '" + value + "'");
    }
  } else if (key == "trials") {
    trials = count();
  } else if (key == "episodes") {
    episodes = count();
  } else if (key == "seed") {
    seed = parse_unsigned(key, value);
  } else if (key == "out") {
    out = value;
  } else if (key == "window") {
    window = count();
  } else if (key == "threads") {
    threads = count();
  } else if (key == "normalize_obs") {
    normalize_obs = parse_bool(key, value);
  } else if (key == "hidden_units") {
    hidden_units = count();
  } else if (key == "action_sees_observation") {
    action_sees_observation = parse_bool(key, value);
  } else if (key == "observation_dim") {
    observation_dim = count();
  } else if (key == "action_dims") {
    action_dims = count();
  } else if (key == "action_bins") {
    action_bins = parse_list(key, value);
  } else if (key == "hidden_execution") {
    hidden_execution = parse_execution(key, value);
  } else if (key == "action_execution") {
    action_execution = parse_execution(key, value);
  } else if (key == "sharing") {
    if (value == "none") {
      sharing.reset();
    } else {
      std::vector<std::size_t> assignment;
      for (const auto& part : split(value, ',')) assignment.push_back(parse_unsigned(key, part));
      sharing = std::move(assignment);
    }
  } else if (key == "actor_lr") {
    hyper.actor_lr = parse_double(key, value);
  } else if (key == "actor_beta1") {
    hyper.actor_beta1 = parse_double(key, value);
  } else if (key == "actor_beta2") {
    hyper.actor_beta2 = parse_double(key, value);
  } else if (key == "lambda_actor") {
    hyper.lambda_actor = parse_double(key, value);
  } else if (key == "critic_lr") {
    hyper.critic_lr = parse_double(key, value);
  } else if (key == "critic_beta1") {
    hyper.critic_beta1 = parse_double(key, value);
  } else if (key == "critic_beta2") {
    hyper.critic_beta2 = parse_double(key, value);
  } else if (key == "lambda_critic") {
    hyper.lambda_critic = parse_double(key, value);
  } else if (key == "gamma") {
    hyper.gamma = parse_double(key, value);
  } else if (key == "adam_eps") {
    hyper.adam_eps = parse_double(key, value);
  } else if (key == "batch_actor") {
    hyper.batch_actor = count();
  } else if (key == "batch_critic") {
    hyper.batch_critic = count();
  } else {
    throw ValidationError("unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
  };
  auto unit = [&](double v, const char* name) { require(v >= 0.0 && v <= 1.0, std::string(name) + ": must be in [0,1]"); };
  auto beta = [&](double v, const char* name) { require(v >= 0.0 && v < 1.0, std::string(name) + ": must be in [0,1)"); };
  require(trials >= 1, "trials: must be at least 1");
  require(episodes >= 1, "episodes: must be at least 1");
  require(window >= 1, "window: must be at least 1");
  require(threads >= 1, "threads: must be at least 1");
  require(hyper.actor_lr > 0.0, "actor_lr: must be positive");
  require(hyper.critic_lr > 0.0, "critic_lr: must be positive");
  require(hyper.adam_eps > 0.0, "adam_eps: must be positive");
  require(hyper.batch_actor >= 1, "batch_actor: must be at least 1");
  require(hyper.batch_critic >= 1, "batch_critic: must be at least 1");
  beta(hyper.actor_beta1, "actor_beta1");
  beta(hyper.actor_beta2, "actor_beta2");
  beta(hyper.critic_beta1, "critic_beta1");
  beta(hyper.critic_beta2, "critic_beta2");
  unit(hyper.lambda_actor, "lambda_actor");
  unit(hyper.lambda_critic, "lambda_critic");
  unit(hyper.gamma, "gamma");
  require(!action_bins.empty(), "action_bins: must not be empty");
}

TopologyDescription ExperimentConfig::topology() const {
  TopologyDescription d;
  d.hidden_units = hidden_units;
  d.action_sees_observation = action_sees_observation;
  d.action_bins = action_bins;
  d.hidden_execution = hidden_execution;
  d.action_execution = action_execution;
  d.sharing = sharing;
  if (env == "none") {
    if (observation_dim == 0 || action_dims == 0) {
      throw ValidationError("observation_dim: env = none needs observation_dim and action_dims");
    }
    d.observation_dim = observation_dim;
    d.discrete_actions = false;
    d.action_size = action_dims;
    return d;
  }
  const auto environment = make_environment(env);
  if (observation_dim != 0 && observation_dim != environment->observation_dim()) {
    throw ValidationError("observation_dim: " + std::to_string(observation_dim) + " does not match " + env + " (" +
                          std::to_string(environment->observation_dim()) + ")");
  }
  if (action_dims != 0 && (environment->discrete_actions() || action_dims != environment->action_size())) {
    throw ValidationError("action_dims: does not match the action space of " + env);
  }
  d.observation_dim = environment->observation_dim();
  d.discrete_actions = environment->discrete_actions();
  d.action_size = environment->action_size();
  return d;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ValidationError(key + ": set more than once");
    config.set(key, trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

Vector moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw InputError("moving_average: window must be positive");
  Vector out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::size_t first = k + 1 >= window ? k + 1 - window : 0;
    double total = 0.0;
    for (std::size_t j = first; j <= k; ++j) total += values[j];
    out[k] = total / static_cast<double>(k - first + 1);
  }
  return out;
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double variance = 0.0;  // sample variance, 0 for a single value
};

MeanSe mean_and_variance(std::span<const double> xs) {
  MeanSe r;
  double total = 0.0;
  for (double x : xs) total += x;
  const double n = static_cast<double>(xs.size());
  r.mean = total / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.variance = ss / (n - 1.0);
  }
  return r;
}

}  // namespace

Summary summarize(const std::vector<Vector>& returns, std::size_t window) {
  if (returns.empty()) throw InputError("summarize: no trials");
  if (window == 0) throw InputError("summarize: window must be positive");
  const std::size_t episodes = returns.front().size();
  for (const auto& r : returns) {
    if (r.size() != episodes) throw InputError("summarize: trials have different episode counts");
  }
  if (window > episodes) {
    throw InputError("summarize: window " + std::to_string(window) + " exceeds the episode count " +
                     std::to_string(episodes));
  }
  Summary s;
  s.trials = returns.size();
  s.episodes = episodes;
  s.window = window;
  const double n = static_cast<double>(s.trials);

  std::vector<Vector> averaged;
  for (const auto& r : returns) averaged.push_back(moving_average(r, window));
  s.curve_mean.resize(episodes);
  s.curve_standard_error.resize(episodes);
  Vector column(s.trials);
  for (std::size_t k = 0; k < episodes; ++k) {
    for (std::size_t i = 0; i < s.trials; ++i) column[i] = averaged[i][k];
    const auto stats = mean_and_variance(column);
    s.curve_mean[k] = stats.mean;
    s.curve_standard_error[k] = std::sqrt(stats.variance / n);
  }

  Vector final_means(s.trials);
  for (std::size_t i = 0; i < s.trials; ++i) final_means[i] = averaged[i][episodes - 1];
  const auto final_stats = mean_and_variance(final_means);
  s.average_return = final_stats.mean;
  s.standard_error = std::sqrt(final_stats.variance / n);

  double std_total = 0.0;
  for (std::size_t k = episodes - window; k < episodes; ++k) {
    for (std::size_t i = 0; i < s.trials; ++i) column[i] = returns[i][k];
    std_total += std::sqrt(mean_and_variance(column).variance);
  }
  s.standard_deviation = std_total / static_cast<double>(window);
  return s;
}

std::string format_summary(const Summary& s) {
  std::ostringstream out;
  out << "trials = " << s.trials << '\n'
      << "episodes = " << s.episodes << '\n'
      << "window = " << s.window << '\n'
      << "average_return = " << format_number(s.average_return) << '\n'
      << "standard_error = " << format_number(s.standard_error) << '\n'
      << "standard_deviation = " << format_number(s.standard_deviation) << '\n';
  return out.str();
}

std::string format_curve(const Summary& s) {
  std::ostringstream out;
  out << "episode,mean,standard_error\n";
  for (std::size_t k = 0; k < s.curve_mean.size(); ++k) {
    out << k << ',' << format_number(s.curve_mean[k]) << ',' << format_number(s.curve_standard_error[k]) << '\n';
  }
  return out.str();
}

std::string format_trial_csv(const TrialResult& trial) {
  std::ostringstream out;
  out << "trial,episode,return,steps\n";
  for (std::size_t k = 0; k < trial.returns.size(); ++k) {
    out << trial.trial << ',' << k << ',' << format_number(trial.returns[k]) << ',' << trial.steps[k] << '\n';
  }
  return out.str();
}

namespace {

struct TrialContext {
  std::unique_ptr<Environment> env;
  Network network;
  Rng env_rng;
  Rng policy_rng;
  Rng exec_rng;
  Rng init_rng;
  ObservationNormalizer normalizer;
  bool normalize;

  TrialContext(const ExperimentConfig& config, std::uint64_t seed)
      : env(make_environment(config.env)),
        network(build_network(config.topology())),
        env_rng(seed, 0, static_cast<std::uint64_t>(Stream::kEnvironment)),
        policy_rng(seed, 0, static_cast<std::uint64_t>(Stream::kPolicy)),
        exec_rng(seed, 0, static_cast<std::uint64_t>(Stream::kExecution)),
        init_rng(seed, 0, static_cast<std::uint64_t>(Stream::kInit)),
        normalizer(env->observation_dim()),
        normalize(config.normalize_obs) {}

  Vector observe(const Vector& raw) { return normalize ? normalizer.normalize(raw, true) : raw; }
};

void run_reinforce(const ExperimentConfig& config, TrialContext& ctx, TrialResult& result) {
  AdamState adam(config.hyper.actor_adam(), ctx.network.store.unique.size());
  Vector theta_nu = ctx.network.store.expand();
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    Trajectory trajectory;
    Vector obs = ctx.observe(ctx.env->reset(ctx.env_rng));
    std::vector<std::size_t> held;
    double total = 0.0;
    for (std::size_t t = 0;; ++t) {
      AtomicStepRecord record =
          network_step(ctx.network.topology, theta_nu, obs, held, t, {ctx.policy_rng, ctx.exec_rng});
      const StepOutcome outcome = ctx.env->step(record.action, ctx.env_rng);
      record.reward = outcome.reward;
      total += outcome.reward;
      held = record.outputs;
      trajectory.steps.push_back(std::move(record));
      if (outcome.done) break;
      obs = ctx.observe(outcome.observation);
    }
    trajectory.episode_return = discounted_return(trajectory.rewards(), config.hyper.gamma, 0);
    reinforce_episode_update(ctx.network, trajectory, config.hyper.gamma, adam);
    theta_nu = ctx.network.store.expand();
    result.returns.push_back(total);
    result.steps.push_back(trajectory.steps.size());
  }
}

void run_actor_critic(const ExperimentConfig& config, TrialContext& ctx, TrialResult& result) {
  CriticNet critic(ctx.env->observation_dim(), ctx.init_rng);
  ActorCriticState state(ctx.network, critic, config.hyper);
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    state.traces.reset();
    Vector obs = ctx.observe(ctx.env->reset(ctx.env_rng));
    std::vector<std::size_t> held;
    double total = 0.0;
    std::size_t t = 0;
    for (;; ++t) {
      const AtomicStepRecord record =
          network_step(ctx.network.topology, state.theta_nu, obs, held, t, {ctx.policy_rng, ctx.exec_rng});
      const StepOutcome outcome = ctx.env->step(record.action, ctx.env_rng);
      total += outcome.reward;
      const Vector next = ctx.observe(outcome.observation);
      actor_critic_step(ctx.network, critic, {obs, record, outcome.reward, next, outcome.done}, state, config.hyper);
      held = record.outputs;
      obs = next;
      if (outcome.done) break;
    }
    result.returns.push_back(total);
    result.steps.push_back(t + 1);
  }
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& config, std::size_t trial) {
  if (config.env == "none") throw ValidationError("env: training needs an environment");
  const auto start = std::chrono::steady_clock::now();
  TrialResult result;
  result.trial = trial;
  result.seed = config.seed + trial;
  TrialContext ctx(config, result.seed);
  if (config.algorithm == Algorithm::kReinforce) {
    run_reinforce(config, ctx, result);
  } else {
    run_actor_critic(config, ctx, result);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.window > config.episodes) {
    throw ValidationError("window: " + std::to_string(config.window) + " exceeds episodes (" +
                          std::to_string(config.episodes) + ")");
  }
  // surface topology errors before any thread starts
  build_network(config.topology());
  if (!config.out.empty()) std::filesystem::create_directories(config.out);

  ExperimentResult result;
  result.trials.resize(config.trials);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t trial = next++; trial < config.trials; trial = next++) {
      try {
        result.trials[trial] = run_trial(config, trial);
        if (!config.out.empty()) {
          write_atomically(config.out / trial_filename(trial), format_trial_csv(result.trials[trial]));
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(config.threads, config.trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<Vector> returns;
  for (const auto& t : result.trials) returns.push_back(t.returns);
  result.summary = summarize(returns, config.window);
  if (!config.out.empty()) {
    write_atomically(config.out / "summary.txt", format_summary(result.summary));
    write_atomically(config.out / "curve.csv", format_curve(result.summary));
  }
  return result;
}

std::vector<TrialResult> read_results(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("trial_") && name.ends_with(".csv")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no trial_*.csv files in " + dir.string());

  std::vector<TrialResult> results;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot read " + file.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "trial,episode,return,steps") {
      throw IoError(file.string() + ": missing header row");
    }
    TrialResult r;
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (trim(line).empty()) continue;
      const auto fields = split(line, ',');
      const std::string where = file.string() + ":" + std::to_string(row);
      if (fields.size() != 4) throw IoError(where + ": expected 4 columns");
      try {
        r.trial = parse_unsigned("trial", fields[0]);
        if (parse_unsigned("episode", fields[1]) != r.returns.size()) throw IoError(where + ": episodes out of order");
        r.returns.push_back(parse_double("return", fields[2]));
        r.steps.push_back(parse_unsigned("steps", fields[3]));
      } catch (const ValidationError& e) {
        throw IoError(where + ": " + e.what());
      }
    }
    results.push_back(std::move(r));
  }
  return results;
}

Summary summarize_directory(const std::filesystem::path& dir, std::size_t window) {
  std::vector<Vector> returns;
  for (auto& r : read_results(dir)) returns.push_back(std::move(r.returns));
  return summarize(returns, window);
}

std::string dry_run_report(const ExperimentConfig& config) {
  const Network network = build_network(config.topology());
  const auto& topology = network.topology;
  std::ostringstream out;
  out << "coagents = " << topology.size() << '\n'
      << "nonunique_parameters = " << topology.num_nonunique() << '\n'
      << "unique_parameters = " << topology.sharing().num_unique() << '\n';
  // runs of identically sized coagents
  std::size_t i = 0;
  std::size_t layer = 1;
  while (i < topology.size()) {
    std::size_t j = i;
    while (j < topology.size() && topology.param_count(j) == topology.param_count(i) &&
           topology.input_dim(j) == topology.input_dim(i) &&
           topology.coagent(j).num_outputs() == topology.coagent(i).num_outputs()) {
      ++j;
    }
    out << "layer " << layer++ << " = " << (j - i) << " coagents x " << topology.param_count(i) << " parameters ("
        << topology.input_dim(i) << " inputs, " << topology.coagent(i).num_outputs() << " outputs)\n";
    i = j;
  }
  return out.str();
}

}  // namespace coagent
