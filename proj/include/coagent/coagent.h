/* C interface to the coagent network library.
 *
 * Every fallible call returns a coagent_status; on failure a description
 * is available from coagent_last_error() on the same thread. Handles are
 * opaque and released with the matching *_free function. Strings returned
 * through char** out-parameters are heap-allocated and released with
 * coagent_string_free(). */
#ifndef COAGENT_COAGENT_H_
#define COAGENT_COAGENT_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define COAGENT_API __declspec(dllexport)
#else
#define COAGENT_API __attribute__((visibility("default")))
#endif

typedef enum coagent_status {
  COAGENT_OK = 0,
  COAGENT_ERROR_INPUT = 1,      /* bad argument, index or dimension */
  COAGENT_ERROR_VALIDATION = 2, /* config or topology rejected */
  COAGENT_ERROR_RESOURCE = 3,   /* enumeration budget exceeded */
  COAGENT_ERROR_IO = 4,
  COAGENT_ERROR_INTERNAL = 5
} coagent_status;

typedef struct coagent_config coagent_config;
typedef struct coagent_network coagent_network;
typedef struct coagent_results coagent_results;

COAGENT_API const char* coagent_last_error(void);
COAGENT_API const char* coagent_status_name(coagent_status status);
COAGENT_API void coagent_string_free(char* s);

/* Experiment configuration */

COAGENT_API coagent_status coagent_config_load(const char* path, coagent_config** out);
COAGENT_API coagent_status coagent_config_parse(const char* text, coagent_config** out);
/* Overrides one key, with the same names and checks as the config file. */
COAGENT_API coagent_status coagent_config_set(coagent_config* config, const char* key, const char* value);
COAGENT_API void coagent_config_free(coagent_config* config);

/* Networks */

COAGENT_API coagent_status coagent_network_build(const coagent_config* config, coagent_network** out);
COAGENT_API size_t coagent_network_num_coagents(const coagent_network* network);
COAGENT_API size_t coagent_network_num_nonunique(const coagent_network* network);
COAGENT_API size_t coagent_network_num_unique(const coagent_network* network);
COAGENT_API coagent_status coagent_network_coagent_info(const coagent_network* network, size_t index,
                                                        size_t* input_dim, size_t* num_outputs,
                                                        size_t* num_params);
/* Copies up to `capacity` output values of one coagent. */
COAGENT_API coagent_status coagent_network_output_values(const coagent_network* network, size_t index,
                                                         double* values, size_t capacity);
COAGENT_API void coagent_network_free(coagent_network* network);

/* Experiments */

COAGENT_API coagent_status coagent_dry_run(const coagent_config* config, char** report);
COAGENT_API coagent_status coagent_run_experiment(const coagent_config* config, coagent_results** out);
COAGENT_API size_t coagent_results_num_trials(const coagent_results* results);
COAGENT_API size_t coagent_results_num_episodes(const coagent_results* results, size_t trial);
/* Copies up to `capacity` per-episode returns of one trial. */
COAGENT_API coagent_status coagent_results_returns(const coagent_results* results, size_t trial, double* out,
                                                   size_t capacity);
COAGENT_API coagent_status coagent_results_summary(const coagent_results* results, char** text);
COAGENT_API void coagent_results_free(coagent_results* results);

/* Reads trial_*.csv from `dir`; the directory is not modified. */
COAGENT_API coagent_status coagent_summarize(const char* dir, size_t window, char** text);

/* Estimator-vs-finite-difference table over `seeds` random instances per
 * case. *all_passed is set to 1 when every row is within 1e-4. */
COAGENT_API coagent_status coagent_verify_gradients(size_t seeds, char** report, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif /* COAGENT_COAGENT_H_ */
