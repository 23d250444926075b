// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the CLI. Each writes its artifacts into an
// output directory and returns a JSON summary. Output files are a pure
// function of (config, seed, inputs).
//
// Artifacts, relative to the output directory:
//   train                 curves.csv, summary.json, checkpoint_final.json,
//                         checkpoints/epoch_NNN.json, trajectories.jsonl,
//                         nan_dump.json (only on a non-finite abort)
//   eval                  eval.json, eval_images.csv,
//                         eval_images_perturbed.csv (with perturb)
//   reward-surface        reward_surface.csv
//   dependency-histogram  dependency_histogram.csv, dependency_histogram.json
//   pig                   pig.csv, pig.json, pgm/ (with dump_pgm)
//   ablate                ablate.csv, ablate.json
#pragma once

#include <string>

#include "iqa/config.hpp"
#include "iqa/policy.hpp"

namespace iqa {

struct TrainOutcome {
  std::string summary_json;
  PolicyParams params;
};

/// Throws Error(kNonFinite) after writing nan_dump.json.
TrainOutcome run_train(const RunConfig& config, const std::string& out_dir);

/// Correlations are strict: fewer than two images or a constant prediction
/// vector throw Error(kUndefinedCorrelation).
std::string run_eval(const RunConfig& config, const PolicyParams& params,
                     const std::string& out_dir);

std::string run_reward_surface(const RunConfig& config,
                               const std::string& out_dir);

std::string run_dependency_histogram(const RunConfig& config,
                                     const PolicyParams& params,
                                     const std::string& out_dir);

std::string run_pig(const RunConfig& config, const PolicyParams& params,
                    const std::string& out_dir);

/// Trains every (shape, egf) arm for every seed in config.ablate with the
/// train section otherwise unchanged.
std::string run_ablate(const RunConfig& config, const std::string& out_dir);

}  // namespace iqa
