// SPDX-License-Identifier: Apache-2.0
//
// Diagnose-edit refinement loop driven by a trained critic policy and a
// synthetic region editor.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "iqa/policy.hpp"
#include "iqa/synthenv.hpp"

namespace iqa {

enum class Verdict { kSatisfactory, kNeedsEdit };

struct Diagnosis {
  double y_hat = 0.0;
  std::vector<int> visited_cells;
  /// Visited cells whose crop |Laplacian| feature exceeds the artifact
  /// threshold.
  std::vector<int> flagged_cells;
  Verdict verdict = Verdict::kNeedsEdit;
};

struct EditInstruction {
  std::vector<int> target_cells;
  double strength = 0.7;
};

struct PigOptions {
  int k = 3;
  double stop_threshold = 4.5;
  double strength = 0.7;
  double artifact_threshold = 0.0;
  int max_len = 24;
};

/// Percentile `q` (linear interpolation) of the per-cell mean |Laplacian| of
/// `n_images` seeded clean images.
double artifact_threshold(std::uint64_t seed, int n_images = 100,
                          double q = 0.9);

/// Greedy critic rollout. Throws Error(kCriticUnusable) if no score token is
/// emitted.
Diagnosis diagnose(const PolicyParams& critic, const SynthImage& img,
                   const PigOptions& options, std::uint64_t tie_seed);

/// Targets every flagged cell.
EditInstruction make_instruction(const Diagnosis& diagnosis, double strength);

/// Each patch piece inside a target cell has its intensity multiplied by
/// (1 - strength); pixels outside the target cells are untouched.
SynthImage edit(const SynthImage& img, const EditInstruction& instruction);

struct RefineRecord {
  Diagnosis diagnosis;
  std::optional<EditInstruction> instruction;
  double y_before = 0.0;
  /// true_score of the image after this round (equal to y_before when no
  /// edit was made).
  double y_after = 0.0;
};

struct RefineResult {
  SynthImage final_image;
  std::vector<RefineRecord> history;
  int edits = 0;
  /// The critic failed to produce a score; the loop stopped at that round.
  bool critic_failed = false;
};

using Critic = std::function<Diagnosis(const SynthImage&, int round)>;
using Editor =
    std::function<SynthImage(const SynthImage&, const EditInstruction&)>;

/// Up to K diagnose->edit rounds with early stopping on a satisfactory
/// verdict. A critic throwing Error(kCriticUnusable) ends the loop with the
/// current image.
RefineResult refine_loop(const Critic& critic, const Editor& editor,
                         const SynthImage& img0, int k, double strength);

}  // namespace iqa
