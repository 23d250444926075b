// SPDX-License-Identifier: Apache-2.0
//
// Evidence gradient filtering: per-token visual dependency, pivotal-token
// selection and the gradient mask.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "iqa/policy.hpp"
#include "iqa/synthenv.hpp"
#include "iqa/trajectory.hpp"

namespace iqa {

/// Dependency score of every generated token, aligned with
/// generated_indices(traj).
struct DependencyProfile {
  std::vector<std::size_t> positions;
  std::vector<double> scores;
  /// Trajectory position of the terminal score token, if any.
  std::optional<std::size_t> score_position;
};

struct PivotalMask {
  std::vector<std::uint8_t> mask;

  std::size_t count() const;
};

struct EgfOptions {
  double k_pct = 0.4;
  bool always_pivot_score = true;
  /// Number of perturbed images averaged per trajectory.
  int perturb_samples = 1;
  PerturbOptions perturb;
};

/// KL(pi(.|s_t, I) || pi(.|s_t, I')) at each generated position, where both
/// states come from replaying the trajectory's actions on I and on I'.
DependencyProfile dependency_scores_against(const PolicyParams& params,
                                            const Trajectory& traj,
                                            const SynthImage& img,
                                            const SynthImage& perturbed);

/// Same with I' = perturb(img, seed) (averaged over
/// options.perturb_samples perturbations with derived seeds).
DependencyProfile dependency_scores(const PolicyParams& params,
                                    const Trajectory& traj,
                                    const SynthImage& img,
                                    std::uint64_t perturb_seed,
                                    const EgfOptions& options = {});

/// Positions of the ceil(k_pct * n) highest scores, ties to earlier
/// positions; the score token is added when `include_score` is set and it
/// was not selected. Returned in increasing position order.
std::vector<std::size_t> select_pivotal(const DependencyProfile& profile,
                                        double k_pct,
                                        bool include_score = true);

/// 1 at `pivotal`, 0 elsewhere; observation positions are always 0. With
/// `force_score` the terminal score token is set as well.
PivotalMask build_mask(const Trajectory& traj,
                       const std::vector<std::size_t>& pivotal,
                       bool force_score = true);

/// Dependency scores grouped by where the token sits in the trajectory:
/// tokens generated immediately after an observation, and text tokens
/// generated before the first tool call.
struct PhaseScores {
  std::vector<double> post_observation;
  std::vector<double> pre_tool;
};

void split_by_phase(const Trajectory& traj, const DependencyProfile& profile,
                    PhaseScores& out);

/// Mask equal to the loss mask (every generated token), i.e. EGF disabled.
PivotalMask full_mask(const Trajectory& traj);

}  // namespace iqa
