// SPDX-License-Identifier: Apache-2.0
//
// Run configuration shared by every command: a JSON document whose `train`
// section uses the TrainConfig field names, plus per-command sections.
// Every field has a default; unknown keys are rejected.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "iqa/grpo.hpp"

namespace iqa {

struct EvalSection {
  int n_images = 200;
  bool perturb = false;
  int min_patches = 0;
  int max_patches = kMaxPatches;
};

struct RewardSurfaceSection {
  /// Evenly spaced training steps over [0, total_steps], endpoints included.
  int t_points = 3;
  int e_points = 101;
  double e_max = 4.0;
  int total_steps = 2000;
};

struct DependencySection {
  int n_trajectories = 200;
  int bins = 20;
  double bin_width = 0.05;
  /// tau: tokens with score >= threshold count as highly dependent.
  double threshold = 0.1;
  int min_patches = 1;
  int max_patches = kMaxPatches;
};

struct PigSection {
  int k = 3;
  double stop_threshold = 4.5;
  double strength = 0.7;
  int n_images = 100;
  int clean_images = 100;
  int min_patches = 1;
  int max_patches = kMaxPatches;
  /// Clean images and quantile behind the artifact threshold.
  int threshold_images = 100;
  double threshold_quantile = 0.9;
  bool dump_pgm = false;
  /// Images (from the front of the set) dumped when dump_pgm is on.
  int dump_images = 4;
};

struct AblateArm {
  RewardShape shape = RewardShape::kExponential;
  bool egf = true;
};

struct AblateSection {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<RewardShape> shapes{RewardShape::kExponential,
                                  RewardShape::kSigmoid,
                                  RewardShape::kFixedGauss,
                                  RewardShape::kBinary};
  std::vector<bool> egf{true, false};
};

struct LoggingSection {
  /// Steps between trajectory dumps (0 disables the JSONL log).
  int trajectory_every = 100;
  /// Checkpoint at every epoch end in addition to the final one.
  bool epoch_checkpoints = true;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "runs";
  TrainConfig train;
  EvalSection eval;
  RewardSurfaceSection reward_surface;
  DependencySection dependency_histogram;
  PigSection pig;
  AblateSection ablate;
  LoggingSection logging;

  /// Throws Error(kConfig) naming the offending field.
  void validate() const;
};

/// Canonical JSON text of a configuration (all fields present).
std::string config_to_json(const RunConfig& config);

/// Parses a JSON document over the defaults. Missing keys keep their
/// default; unknown keys and type mismatches throw Error(kConfig) naming the
/// key path.
RunConfig config_from_json(std::string_view text);

/// Throws Error(kConfig) when the file cannot be read.
RunConfig load_config(const std::string& path);

/// Applies one `key=value` override. `key` is a dotted path such as
/// `train.reward.shape`, or a leaf name that occurs exactly once in the
/// document (`lr`). `steps=N` is shorthand for one epoch of N steps. The
/// value is parsed as JSON, falling back to a plain string.
void apply_override(RunConfig& config, std::string_view assignment);

}  // namespace iqa
