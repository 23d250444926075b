// SPDX-License-Identifier: Apache-2.0
//
// iqagent: command-line front end. Talks to the library only through the C
// interface in iqa/iqa.h.
//
// Exit codes: 0 success, 2 invalid input (config, checkpoint version,
// undefined correlation, i/o), 3 non-finite training abort, 1 otherwise.

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "iqa/iqa.h"

namespace {

constexpr const char* kOutputDirEnv = "IQA_OUTPUT_DIR";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::string checkpoint;
};

int exit_code(iqa_status status) {
  switch (status) {
    case IQA_OK: return 0;
    case IQA_ERR_NON_FINITE: return 3;
    case IQA_ERR_INTERNAL: return 1;
    default: return 2;
  }
}

int fail(iqa_status status) {
  std::fprintf(stderr, "iqagent: %s: %s\n", iqa_status_name(status),
               iqa_last_error());
  return exit_code(status);
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Owns the handles of one command invocation.
class Session {
 public:
  ~Session() {
    iqa_config_free(config_);
    iqa_policy_free(policy_);
  }

  iqa_status open(const Common& common,
                  const std::vector<std::string>& flag_overrides) {
    iqa_status s = common.config_path.empty()
                       ? iqa_config_new(&config_)
                       : iqa_config_load(common.config_path.c_str(), &config_);
    if (s != IQA_OK) return s;
    for (const auto& o : flag_overrides) {
      if ((s = iqa_config_set(config_, o.c_str())) != IQA_OK) return s;
    }
    for (const auto& o : common.overrides) {
      if ((s = iqa_config_set(config_, o.c_str())) != IQA_OK) return s;
    }
    if (!common.output_dir.empty()) {
      out_dir_ = common.output_dir;
    } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
      out_dir_ = env;
    } else {
      out_dir_ = iqa_config_output_dir(config_);
    }
    return IQA_OK;
  }

  iqa_status load_policy(const std::string& checkpoint) {
    return checkpoint.empty() ? iqa_policy_new(&policy_)
                              : iqa_policy_load(checkpoint.c_str(), &policy_);
  }

  const iqa_config* config() const { return config_; }
  const iqa_policy* policy() const { return policy_; }
  const char* out_dir() const { return out_dir_.c_str(); }

 private:
  iqa_config* config_ = nullptr;
  iqa_policy* policy_ = nullptr;
  std::string out_dir_;
};

int print_json(iqa_status status, char* json) {
  if (status != IQA_OK) {
    iqa_free_string(json);
    return fail(status);
  }
  if (json) std::fputs(json, stdout);
  iqa_free_string(json);
  return 0;
}

void add_common(CLI::App* cmd, Common& common, bool with_checkpoint) {
  cmd->add_option("-c,--config", common.config_path, "JSON run configuration");
  cmd->add_option("-o,--override", common.overrides,
                  "key=value override (repeatable), e.g. train.lr=0.003");
  cmd->add_option("--output-dir", common.output_dir,
                  std::string("artifact directory (default: $") +
                      kOutputDirEnv + ", then the config's output_dir)");
  if (with_checkpoint) {
    cmd->add_option("--checkpoint", common.checkpoint,
                    "policy checkpoint (default: untrained policy)");
  }
}

// Registers an optional flag that turns into `key=value` when given.
template <class T>
void flag_override(CLI::App* cmd, const std::string& name,
                   const std::string& key, std::vector<std::string>& out,
                   const std::string& help) {
  cmd->add_option_function<T>(
      name,
      [key, &out](const T& v) {
        if constexpr (std::is_floating_point_v<T>) {
          out.push_back(key + "=" + number(v));
        } else {
          out.push_back(key + "=" + std::to_string(v));
        }
      },
      help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tool-augmented image-quality agent: training and analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::to_string(iqa_api_version()));

  if (iqa_api_version() != IQA_API_VERSION) {
    std::fprintf(stderr, "iqagent: library API version %d, expected %d\n",
                 iqa_api_version(), IQA_API_VERSION);
    return 2;
  }

  Common common;
  std::vector<std::string> flags;
  std::function<int()> action;

  auto* train = app.add_subcommand("train", "train a policy with GRPO");
  add_common(train, common, false);
  flag_override<unsigned long long>(train, "--seed", "seed", flags,
                                    "root seed");
  flag_override<int>(train, "--steps", "steps", flags,
                     "shorthand for one epoch of N steps");
  train->callback([&] {
    action = [&] {
      Session s;
      iqa_status st = s.open(common, flags);
      if (st != IQA_OK) return fail(st);
      char* json = nullptr;
      const iqa_status rc = iqa_run_train(s.config(), s.out_dir(), &json, nullptr);
      return print_json(rc, json);
    };
  });

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  add_common(eval, common, true);
  flag_override<unsigned long long>(eval, "--seed", "seed", flags, "root seed");
  flag_override<int>(eval, "--n-images", "eval.n_images", flags,
                     "held-out images");
  flag_override<int>(eval, "--min-patches", "eval.min_patches", flags,
                     "fewest distortion patches per image");
  flag_override<int>(eval, "--max-patches", "eval.max_patches", flags,
                     "most distortion patches per image");
  bool perturb = false;
  eval->add_flag("--perturb", perturb,
                 "also evaluate with every crop taken from a perturbed image");
  eval->callback([&] {
    if (perturb) flags.push_back("eval.perturb=true");
    action = [&] {
      Session s;
      iqa_status st = s.open(common, flags);
      if (st == IQA_OK) st = s.load_policy(common.checkpoint);
      if (st != IQA_OK) return fail(st);
      char* json = nullptr;
      const iqa_status rc = iqa_run_eval(s.config(), s.policy(), s.out_dir(), &json);
      return print_json(rc, json);
    };
  });

  auto* surface = app.add_subcommand(
      "reward-surface", "reward versus squared error over training time");
  add_common(surface, common, false);
  flag_override<int>(surface, "--t-points", "reward_surface.t_points", flags,
                     "training steps sampled over [0, T]");
  flag_override<int>(surface, "--e-points", "reward_surface.e_points", flags,
                     "squared-error grid points");
  flag_override<double>(surface, "--e-max", "reward_surface.e_max", flags,
                        "largest squared error");
  flag_override<int>(surface, "--total-steps", "reward_surface.total_steps",
                     flags, "schedule length T");
  surface->callback([&] {
    action = [&] {
      Session s;
      iqa_status st = s.open(common, flags);
      if (st != IQA_OK) return fail(st);
      char* json = nullptr;
      const iqa_status rc = iqa_run_reward_surface(s.config(), s.out_dir(), &json);
      return print_json(rc, json);
    };
  });

  auto* dep = app.add_subcommand("dependency-histogram",
                                 "histogram of per-token visual dependency");
  add_common(dep, common, true);
  flag_override<unsigned long long>(dep, "--seed", "seed", flags, "root seed");
  flag_override<int>(dep, "--n-trajectories",
                     "dependency_histogram.n_trajectories", flags,
                     "sampled trajectories");
  flag_override<double>(dep, "--threshold", "dependency_histogram.threshold",
                        flags, "dependency threshold tau");
  flag_override<int>(dep, "--bins", "dependency_histogram.bins", flags,
                     "histogram bins (last bin is open-ended)");
  flag_override<double>(dep, "--bin-width", "dependency_histogram.bin_width",
                        flags, "bin width");
  dep->callback([&] {
    action = [&] {
      Session s;
      iqa_status st = s.open(common, flags);
      if (st == IQA_OK) st = s.load_policy(common.checkpoint);
      if (st != IQA_OK) return fail(st);
      char* json = nullptr;
      const iqa_status rc = iqa_run_dependency_histogram(s.config(), s.policy(), s.out_dir(), &json);
      return print_json(rc, json);
    };
  });

  auto* pig = app.add_subcommand("pig", "diagnose-edit refinement loop");
  add_common(pig, common, true);
  flag_override<unsigned long long>(pig, "--seed", "seed", flags, "root seed");
  flag_override<int>(pig, "--k", "pig.k", flags, "maximum refinement rounds");
  flag_override<double>(pig, "--stop-threshold", "pig.stop_threshold", flags,
                        "early-stop score on the 1-5 scale");
  flag_override<double>(pig, "--strength", "pig.strength", flags,
                        "edit strength in (0, 1]");
  flag_override<int>(pig, "--n-images", "pig.n_images", flags,
                     "distorted images");
  bool dump_pgm = false;
  pig->add_flag("--dump-pgm", dump_pgm, "write PGM images per iteration");
  pig->callback([&] {
    if (dump_pgm) flags.push_back("pig.dump_pgm=true");
    action = [&] {
      Session s;
      iqa_status st = s.open(common, flags);
      if (st == IQA_OK) st = s.load_policy(common.checkpoint);
      if (st != IQA_OK) return fail(st);
      char* json = nullptr;
      const iqa_status rc = iqa_run_pig(s.config(), s.policy(), s.out_dir(), &json);
      return print_json(rc, json);
    };
  });

  auto* ablate = app.add_subcommand(
      "ablate", "train every reward shape x EGF arm over several seeds");
  add_common(ablate, common, false);
  std::vector<unsigned long long> seeds;
  ablate->add_option("--seeds", seeds, "seeds (default: config ablate.seeds)");
  ablate->callback([&] {
    if (!seeds.empty()) {
      std::string list = "ablate.seeds=[";
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        list += (i ? "," : "") + std::to_string(seeds[i]);
      }
      flags.push_back(list + "]");
    }
    action = [&] {
      Session s;
      iqa_status st = s.open(common, flags);
      if (st != IQA_OK) return fail(st);
      char* json = nullptr;
      const iqa_status rc = iqa_run_ablate(s.config(), s.out_dir(), &json);
      return print_json(rc, json);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return action ? action() : 2;
}
