/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface of the iqa shared library.
 *
 * Objects are opaque handles created and released by the library. Every
 * fallible call returns an iqa_status; on failure a message is available
 * from iqa_last_error() on the calling thread until the next failing call.
 * Strings returned through char** out-parameters are owned by the caller
 * and released with iqa_free_string().
 */
#ifndef IQA_IQA_H
#define IQA_IQA_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(IQA_BUILDING_LIBRARY)
#    define IQA_API __declspec(dllexport)
#  else
#    define IQA_API __declspec(dllimport)
#  endif
#else
#  define IQA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define IQA_API_VERSION 1

typedef enum iqa_status {
  IQA_OK = 0,
  IQA_ERR_INVALID_ARGUMENT = 1,
  IQA_ERR_CONFIG = 2,
  IQA_ERR_NON_FINITE = 3,
  IQA_ERR_IO = 4,
  IQA_ERR_VERSION_MISMATCH = 5,
  IQA_ERR_UNDEFINED_CORRELATION = 6,
  IQA_ERR_CRITIC_UNUSABLE = 7,
  IQA_ERR_INTERNAL = 100
} iqa_status;

typedef struct iqa_config iqa_config;
typedef struct iqa_policy iqa_policy;

IQA_API int iqa_api_version(void);
IQA_API const char* iqa_status_name(iqa_status status);
IQA_API const char* iqa_last_error(void);
IQA_API void iqa_free_string(char* s);

/* Run configuration. */
IQA_API iqa_status iqa_config_new(iqa_config** out);
IQA_API iqa_status iqa_config_load(const char* path, iqa_config** out);
/* One "key=value" override; see the README for the key syntax. */
IQA_API iqa_status iqa_config_set(iqa_config* config, const char* assignment);
IQA_API iqa_status iqa_config_to_json(const iqa_config* config, char** out);
/* Borrowed pointer, valid until the config is modified or freed. */
IQA_API const char* iqa_config_output_dir(const iqa_config* config);
IQA_API void iqa_config_free(iqa_config* config);

/* Policy parameters. A new policy is the all-zero (uniform) policy. */
IQA_API iqa_status iqa_policy_new(iqa_policy** out);
/* IQA_ERR_VERSION_MISMATCH when the checkpoint layout differs. */
IQA_API iqa_status iqa_policy_load(const char* path, iqa_policy** out);
IQA_API iqa_status iqa_policy_save(const iqa_policy* policy, const char* path);
IQA_API size_t iqa_policy_num_params(void);
IQA_API iqa_status iqa_policy_get_params(const iqa_policy* policy, double* out,
                                         size_t n);
IQA_API iqa_status iqa_policy_set_params(iqa_policy* policy, const double* in,
                                         size_t n);
IQA_API void iqa_policy_free(iqa_policy* policy);

/*
 * Commands. Each writes its artifacts into out_dir and returns a JSON
 * summary through `json` (may be NULL).
 */
/* `trained` (may be NULL) receives the final policy. */
IQA_API iqa_status iqa_run_train(const iqa_config* config, const char* out_dir,
                                 char** json, iqa_policy** trained);
IQA_API iqa_status iqa_run_eval(const iqa_config* config,
                                const iqa_policy* policy, const char* out_dir,
                                char** json);
IQA_API iqa_status iqa_run_reward_surface(const iqa_config* config,
                                          const char* out_dir, char** json);
IQA_API iqa_status iqa_run_dependency_histogram(const iqa_config* config,
                                                const iqa_policy* policy,
                                                const char* out_dir,
                                                char** json);
IQA_API iqa_status iqa_run_pig(const iqa_config* config,
                               const iqa_policy* policy, const char* out_dir,
                               char** json);
IQA_API iqa_status iqa_run_ablate(const iqa_config* config, const char* out_dir,
                                  char** json);

/* Numeric entry points. */
IQA_API iqa_status iqa_srcc(const double* xs, const double* ys, size_t n,
                            double* out);
IQA_API iqa_status iqa_plcc(const double* xs, const double* ys, size_t n,
                            double* out);
/* Sharpness k(t) of the configuration's reward schedule over
 * `total_steps` steps. */
IQA_API iqa_status iqa_sharpness(const iqa_config* config, int t,
                                 int total_steps, double* out);
/* Score reward of squared error e at sharpness k; shape is one of
 * "sigmoid", "exponential", "binary", "fixed_gauss". */
IQA_API iqa_status iqa_score_reward(const iqa_config* config,
                                    const char* shape, double k, double e,
                                    double* out);

#ifdef __cplusplus
}
#endif

#endif /* IQA_IQA_H */
