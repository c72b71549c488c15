// coagent: train, verify and summarize coagent networks.
#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "coagent/coagent.h"

namespace {

int report_failure(coagent_status status) {
  std::fprintf(stderr, "error (%s): %s\n", coagent_status_name(status), coagent_last_error());
  return static_cast<int>(status);
}

int print_and_free(char* text) {
  std::fputs(text, stdout);
  coagent_string_free(text);
  return 0;
}

struct ConfigHandle {
  coagent_config* ptr = nullptr;
  ~ConfigHandle() { coagent_config_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coagent network experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  auto* train = app.add_subcommand("train", "Run all trials of an experiment config");
  train->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  train->add_option("--trials", trials, "Override the number of trials");
  train->add_option("--seed", seed, "Override the base seed");
  train->add_option("--out", out_dir, "Override the output directory");

  std::size_t seeds = 20;
  auto* verify = app.add_subcommand("verify-gradients", "Check estimator expectations against finite differences");
  verify->add_option("--seeds", seeds, "Random instances per case")->check(CLI::PositiveNumber);

  std::string in_dir;
  std::size_t window = 1000;
  auto* summarize = app.add_subcommand("summarize", "Summarize trial CSV files");
  summarize->add_option("--in", in_dir, "Results directory")->required()->check(CLI::ExistingDirectory);
  summarize->add_option("--window", window, "Moving-average window")->required()->check(CLI::PositiveNumber);

  std::string dry_config;
  auto* dry = app.add_subcommand("dry-run", "Build the network from a config and print its size");
  dry->add_option("--config", dry_config, "Experiment config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (*train) {
    ConfigHandle config;
    if (auto s = coagent_config_load(config_path.c_str(), &config.ptr); s != COAGENT_OK) return report_failure(s);
    auto set = [&](const char* key, const std::string& value) { return coagent_config_set(config.ptr, key, value.c_str()); };
    if (trials) {
      if (auto s = set("trials", std::to_string(*trials)); s != COAGENT_OK) return report_failure(s);
    }
    if (seed) {
      if (auto s = set("seed", std::to_string(*seed)); s != COAGENT_OK) return report_failure(s);
    }
    if (out_dir) {
      if (auto s = set("out", *out_dir); s != COAGENT_OK) return report_failure(s);
    }
    coagent_results* results = nullptr;
    if (auto s = coagent_run_experiment(config.ptr, &results); s != COAGENT_OK) return report_failure(s);
    char* text = nullptr;
    const auto s = coagent_results_summary(results, &text);
    coagent_results_free(results);
    if (s != COAGENT_OK) return report_failure(s);
    return print_and_free(text);
  }

  if (*verify) {
    char* report = nullptr;
    int passed = 0;
    if (auto s = coagent_verify_gradients(seeds, &report, &passed); s != COAGENT_OK) return report_failure(s);
    print_and_free(report);
    return passed ? 0 : 1;
  }

  if (*summarize) {
    char* text = nullptr;
    if (auto s = coagent_summarize(in_dir.c_str(), window, &text); s != COAGENT_OK) return report_failure(s);
    return print_and_free(text);
  }

  if (*dry) {
    ConfigHandle config;
    if (auto s = coagent_config_load(dry_config.c_str(), &config.ptr); s != COAGENT_OK) return report_failure(s);
    char* report = nullptr;
    if (auto s = coagent_dry_run(config.ptr, &report); s != COAGENT_OK) return report_failure(s);
    return print_and_free(report);
  }
  return 0;
}
