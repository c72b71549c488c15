#include "coagent/coagent.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "coagent/error.hpp"
#include "coagent/harness.hpp"
#include "coagent/oracle.hpp"

struct coagent_config {
  coagent::ExperimentConfig config;
};

struct coagent_network {
  coagent::Network network;
};

struct coagent_results {
  coagent::ExperimentResult result;
};

namespace {

thread_local std::string last_error;

coagent_status fail(coagent_status status, const char* message) {
  last_error = message;
  return status;
}

template <typename F>
coagent_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return COAGENT_OK;
  } catch (const coagent::InputError& e) {
    return fail(COAGENT_ERROR_INPUT, e.what());
  } catch (const coagent::ValidationError& e) {
    return fail(COAGENT_ERROR_VALIDATION, e.what());
  } catch (const coagent::ResourceError& e) {
    return fail(COAGENT_ERROR_RESOURCE, e.what());
  } catch (const coagent::IoError& e) {
    return fail(COAGENT_ERROR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(COAGENT_ERROR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(COAGENT_ERROR_RESOURCE, "out of memory");
  } catch (const std::exception& e) {
    return fail(COAGENT_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(COAGENT_ERROR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define REQUIRE_ARG(cond) \
  if (!(cond)) return fail(COAGENT_ERROR_INPUT, "null argument: " #cond)

}  // namespace

extern "C" {

const char* coagent_last_error(void) { return last_error.c_str(); }

const char* coagent_status_name(coagent_status status) {
  switch (status) {
    case COAGENT_OK: return "ok";
    case COAGENT_ERROR_INPUT: return "input error";
    case COAGENT_ERROR_VALIDATION: return "validation error";
    case COAGENT_ERROR_RESOURCE: return "resource error";
    case COAGENT_ERROR_IO: return "io error";
    case COAGENT_ERROR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void coagent_string_free(char* s) { std::free(s); }

coagent_status coagent_config_load(const char* path, coagent_config** out) {
  REQUIRE_ARG(path != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] { *out = new coagent_config{coagent::load_config(path)}; });
}

coagent_status coagent_config_parse(const char* text, coagent_config** out) {
  REQUIRE_ARG(text != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] { *out = new coagent_config{coagent::parse_config(text)}; });
}

coagent_status coagent_config_set(coagent_config* config, const char* key, const char* value) {
  REQUIRE_ARG(config != nullptr && key != nullptr && value != nullptr);
  return guarded([&] {
    coagent::ExperimentConfig updated = config->config;
    updated.set(key, value);
    updated.validate();
    config->config = std::move(updated);
  });
}

void coagent_config_free(coagent_config* config) { delete config; }

coagent_status coagent_network_build(const coagent_config* config, coagent_network** out) {
  REQUIRE_ARG(config != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] { *out = new coagent_network{coagent::build_network(config->config.topology())}; });
}

size_t coagent_network_num_coagents(const coagent_network* network) {
  return network == nullptr ? 0 : network->network.topology.size();
}

size_t coagent_network_num_nonunique(const coagent_network* network) {
  return network == nullptr ? 0 : network->network.topology.num_nonunique();
}

size_t coagent_network_num_unique(const coagent_network* network) {
  return network == nullptr ? 0 : network->network.store.unique.size();
}

coagent_status coagent_network_coagent_info(const coagent_network* network, size_t index, size_t* input_dim,
                                            size_t* num_outputs, size_t* num_params) {
  REQUIRE_ARG(network != nullptr);
  const auto& topology = network->network.topology;
  if (index >= topology.size()) return fail(COAGENT_ERROR_INPUT, "coagent index out of range");
  if (input_dim != nullptr) *input_dim = topology.input_dim(index);
  if (num_outputs != nullptr) *num_outputs = topology.coagent(index).num_outputs();
  if (num_params != nullptr) *num_params = topology.param_count(index);
  last_error.clear();
  return COAGENT_OK;
}

coagent_status coagent_network_output_values(const coagent_network* network, size_t index, double* values,
                                             size_t capacity) {
  REQUIRE_ARG(network != nullptr && values != nullptr);
  const auto& topology = network->network.topology;
  if (index >= topology.size()) return fail(COAGENT_ERROR_INPUT, "coagent index out of range");
  const auto& v = topology.coagent(index).output_values;
  if (capacity < v.size()) return fail(COAGENT_ERROR_INPUT, "output buffer too small");
  std::copy(v.begin(), v.end(), values);
  last_error.clear();
  return COAGENT_OK;
}

void coagent_network_free(coagent_network* network) { delete network; }

coagent_status coagent_dry_run(const coagent_config* config, char** report) {
  REQUIRE_ARG(config != nullptr && report != nullptr);
  *report = nullptr;
  return guarded([&] { *report = copy_string(coagent::dry_run_report(config->config)); });
}

coagent_status coagent_run_experiment(const coagent_config* config, coagent_results** out) {
  REQUIRE_ARG(config != nullptr && out != nullptr);
  *out = nullptr;
  return guarded([&] { *out = new coagent_results{coagent::run_experiment(config->config)}; });
}

size_t coagent_results_num_trials(const coagent_results* results) {
  return results == nullptr ? 0 : results->result.trials.size();
}

size_t coagent_results_num_episodes(const coagent_results* results, size_t trial) {
  if (results == nullptr || trial >= results->result.trials.size()) return 0;
  return results->result.trials[trial].returns.size();
}

coagent_status coagent_results_returns(const coagent_results* results, size_t trial, double* out, size_t capacity) {
  REQUIRE_ARG(results != nullptr && out != nullptr);
  if (trial >= results->result.trials.size()) return fail(COAGENT_ERROR_INPUT, "trial index out of range");
  const auto& r = results->result.trials[trial].returns;
  if (capacity < r.size()) return fail(COAGENT_ERROR_INPUT, "returns buffer too small");
  std::copy(r.begin(), r.end(), out);
  last_error.clear();
  return COAGENT_OK;
}

coagent_status coagent_results_summary(const coagent_results* results, char** text) {
  REQUIRE_ARG(results != nullptr && text != nullptr);
  *text = nullptr;
  return guarded([&] { *text = copy_string(coagent::format_summary(results->result.summary)); });
}

void coagent_results_free(coagent_results* results) { delete results; }

coagent_status coagent_summarize(const char* dir, size_t window, char** text) {
  REQUIRE_ARG(dir != nullptr && text != nullptr);
  *text = nullptr;
  return guarded([&] { *text = copy_string(coagent::format_summary(coagent::summarize_directory(dir, window))); });
}

coagent_status coagent_verify_gradients(size_t seeds, char** report, int* all_passed) {
  REQUIRE_ARG(report != nullptr);
  *report = nullptr;
  return guarded([&] {
    const auto rows = coagent::verify_gradients(seeds);
    bool ok = !rows.empty();
    for (const auto& r : rows) ok = ok && r.passed;
    if (all_passed != nullptr) *all_passed = ok ? 1 : 0;
    *report = copy_string(coagent::format_gradient_report(rows));
  });
}

}  // extern "C"
