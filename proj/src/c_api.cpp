// SPDX-License-Identifier: Apache-2.0
#include "iqa/iqa.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <span>
#include <string>

#include "iqa/config.hpp"
#include "iqa/error.hpp"
#include "iqa/metrics.hpp"
#include "iqa/policy.hpp"
#include "iqa/reward.hpp"
#include "iqa/runner.hpp"

struct iqa_config {
  iqa::RunConfig value;
};

struct iqa_policy {
  iqa::PolicyParams value;
};

namespace {

thread_local std::string g_last_error;

iqa_status set_error(iqa_status status, const char* message) {
  g_last_error = message;
  return status;
}

iqa_status status_of(iqa::ErrorCode code) {
  switch (code) {
    case iqa::ErrorCode::kInvalidArgument: return IQA_ERR_INVALID_ARGUMENT;
    case iqa::ErrorCode::kConfig: return IQA_ERR_CONFIG;
    case iqa::ErrorCode::kNonFinite: return IQA_ERR_NON_FINITE;
    case iqa::ErrorCode::kIo: return IQA_ERR_IO;
    case iqa::ErrorCode::kVersionMismatch: return IQA_ERR_VERSION_MISMATCH;
    case iqa::ErrorCode::kUndefinedCorrelation:
      return IQA_ERR_UNDEFINED_CORRELATION;
    case iqa::ErrorCode::kCriticUnusable: return IQA_ERR_CRITIC_UNUSABLE;
  }
  return IQA_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes. Nothing escapes
// across the C boundary.
template <class F>
iqa_status guarded(F&& body) {
  try {
    body();
    return IQA_OK;
  } catch (const iqa::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(IQA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(IQA_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(IQA_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** json, const std::string& text) {
  if (json) *json = copy_string(text);
}

void require(bool ok, const char* what) {
  if (!ok) throw iqa::Error(iqa::ErrorCode::kInvalidArgument, what);
}

}  // namespace

extern "C" {

int iqa_api_version(void) { return IQA_API_VERSION; }

const char* iqa_status_name(iqa_status status) {
  switch (status) {
    case IQA_OK: return "ok";
    case IQA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case IQA_ERR_CONFIG: return "config error";
    case IQA_ERR_NON_FINITE: return "non-finite value";
    case IQA_ERR_IO: return "i/o error";
    case IQA_ERR_VERSION_MISMATCH: return "version mismatch";
    case IQA_ERR_UNDEFINED_CORRELATION: return "undefined correlation";
    case IQA_ERR_CRITIC_UNUSABLE: return "critic unusable";
    case IQA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* iqa_last_error(void) { return g_last_error.c_str(); }

void iqa_free_string(char* s) { std::free(s); }

iqa_status iqa_config_new(iqa_config** out) {
  return guarded([&] {
    require(out, "null output pointer");
    *out = new iqa_config{};
  });
}

iqa_status iqa_config_load(const char* path, iqa_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto cfg = std::make_unique<iqa_config>();
    cfg->value = iqa::load_config(path);
    *out = cfg.release();
  });
}

iqa_status iqa_config_set(iqa_config* config, const char* assignment) {
  return guarded([&] {
    require(config && assignment, "null argument");
    iqa::RunConfig updated = config->value;
    iqa::apply_override(updated, assignment);
    config->value = std::move(updated);
  });
}

iqa_status iqa_config_to_json(const iqa_config* config, char** out) {
  return guarded([&] {
    require(config && out, "null argument");
    *out = copy_string(iqa::config_to_json(config->value));
  });
}

const char* iqa_config_output_dir(const iqa_config* config) {
  return config ? config->value.output_dir.c_str() : nullptr;
}

void iqa_config_free(iqa_config* config) { delete config; }

iqa_status iqa_policy_new(iqa_policy** out) {
  return guarded([&] {
    require(out, "null output pointer");
    *out = new iqa_policy{};
  });
}

iqa_status iqa_policy_load(const char* path, iqa_policy** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto p = std::make_unique<iqa_policy>();
    p->value = iqa::load_checkpoint(path).params;
    *out = p.release();
  });
}

iqa_status iqa_policy_save(const iqa_policy* policy, const char* path) {
  return guarded([&] {
    require(policy && path, "null argument");
    iqa::Checkpoint ck;
    ck.params = policy->value;
    iqa::save_checkpoint(ck, path);
  });
}

size_t iqa_policy_num_params(void) { return iqa::kNumParams; }

iqa_status iqa_policy_get_params(const iqa_policy* policy, double* out,
                                 size_t n) {
  return guarded([&] {
    require(policy && out, "null argument");
    require(n == iqa::kNumParams, "parameter count mismatch");
    std::memcpy(out, policy->value.flat.data(), n * sizeof(double));
  });
}

iqa_status iqa_policy_set_params(iqa_policy* policy, const double* in,
                                 size_t n) {
  return guarded([&] {
    require(policy && in, "null argument");
    require(n == iqa::kNumParams, "parameter count mismatch");
    policy->value.flat.assign(in, in + n);
  });
}

void iqa_policy_free(iqa_policy* policy) { delete policy; }

iqa_status iqa_run_train(const iqa_config* config, const char* out_dir,
                         char** json, iqa_policy** trained) {
  return guarded([&] {
    require(config && out_dir, "null argument");
    iqa::TrainOutcome outcome = iqa::run_train(config->value, out_dir);
    emit(json, outcome.summary_json);
    if (trained) *trained = new iqa_policy{std::move(outcome.params)};
  });
}

iqa_status iqa_run_eval(const iqa_config* config, const iqa_policy* policy,
                        const char* out_dir, char** json) {
  return guarded([&] {
    require(config && policy && out_dir, "null argument");
    emit(json, iqa::run_eval(config->value, policy->value, out_dir));
  });
}

iqa_status iqa_run_reward_surface(const iqa_config* config,
                                  const char* out_dir, char** json) {
  return guarded([&] {
    require(config && out_dir, "null argument");
    emit(json, iqa::run_reward_surface(config->value, out_dir));
  });
}

iqa_status iqa_run_dependency_histogram(const iqa_config* config,
                                        const iqa_policy* policy,
                                        const char* out_dir, char** json) {
  return guarded([&] {
    require(config && policy && out_dir, "null argument");
    emit(json,
         iqa::run_dependency_histogram(config->value, policy->value, out_dir));
  });
}

iqa_status iqa_run_pig(const iqa_config* config, const iqa_policy* policy,
                       const char* out_dir, char** json) {
  return guarded([&] {
    require(config && policy && out_dir, "null argument");
    emit(json, iqa::run_pig(config->value, policy->value, out_dir));
  });
}

iqa_status iqa_run_ablate(const iqa_config* config, const char* out_dir,
                          char** json) {
  return guarded([&] {
    require(config && out_dir, "null argument");
    emit(json, iqa::run_ablate(config->value, out_dir));
  });
}

iqa_status iqa_srcc(const double* xs, const double* ys, size_t n,
                    double* out) {
  return guarded([&] {
    require(xs && ys && out, "null argument");
    *out = iqa::srcc(std::span(xs, n), std::span(ys, n));
  });
}

iqa_status iqa_plcc(const double* xs, const double* ys, size_t n,
                    double* out) {
  return guarded([&] {
    require(xs && ys && out, "null argument");
    *out = iqa::plcc(std::span(xs, n), std::span(ys, n));
  });
}

iqa_status iqa_sharpness(const iqa_config* config, int t, int total_steps,
                         double* out) {
  return guarded([&] {
    require(config && out, "null argument");
    iqa::RewardSchedule s = config->value.train.reward.schedule;
    s.total_steps = total_steps;
    s.validate();
    *out = iqa::sharpness(s, t);
  });
}

iqa_status iqa_score_reward(const iqa_config* config, const char* shape,
                            double k, double e, double* out) {
  return guarded([&] {
    require(config && shape && out, "null argument");
    iqa::RewardConfig rc = config->value.train.reward;
    try {
      rc.shape = iqa::reward_shape_from_string(shape);
    } catch (const iqa::Error&) {
      throw iqa::Error(iqa::ErrorCode::kInvalidArgument,
                       std::string("unknown reward shape ") + shape);
    }
    *out = iqa::score_reward_at(rc, k, e);
  });
}

}  // extern "C"
