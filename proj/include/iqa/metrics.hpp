// SPDX-License-Identifier: Apache-2.0
//
// Evaluation: correlation metrics, localization accuracy, greedy evaluation
// runs and the evidence-perturbation comparison.
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "iqa/policy.hpp"
#include "iqa/synthenv.hpp"

namespace iqa {

/// Pearson correlation. Throws Error(kUndefinedCorrelation) for fewer than
/// two samples, mismatched lengths or a constant vector.
double plcc(std::span<const double> xs, std::span<const double> ys);

/// Pearson correlation of average ranks.
double srcc(std::span<const double> xs, std::span<const double> ys);

/// 1-based ranks; tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> values);

/// |union(crops) ∩ union(gt)| / |union(gt)| by pixel counting. Patches with
/// zero intensity are not ground truth. Returns 0 for empty crops; throws
/// Error(kInvalidArgument) when no ground-truth pixel exists.
double acc_loc(std::span<const BBox> crops,
               std::span<const DistortionPatch> gt);

/// Fallback prediction for evaluation rollouts that never emitted a score.
inline constexpr double kMissingPrediction = 3.0;

struct ImageRecord {
  std::uint64_t image_seed = 0;
  double y = 0.0;
  double y_hat = kMissingPrediction;
  bool scored = false;
  std::vector<int> cells;
  /// Localization accuracy of this image; negative when not applicable.
  double acc_loc = -1.0;
};

struct EvalReport {
  double plcc = 0.0;
  double srcc = 0.0;
  /// Mean per-image localization accuracy over images with >= 1 tool call
  /// and >= 1 distortion patch.
  double acc_loc = 0.0;
  int n = 0;
  int n_loc = 0;
  int n_malformed = 0;
  /// False when predictions or targets are constant (correlations then 0).
  bool correlation_defined = true;
  std::vector<ImageRecord> records;
};

/// `n` held-out images from the "eval" stream of `seed`; patch counts are
/// uniform in [min_patches, max_patches].
std::vector<SynthImage> heldout_images(std::uint64_t seed, int n,
                                       int min_patches = 0,
                                       int max_patches = kMaxPatches);

struct EvalOptions {
  int max_len = 24;
  /// Replace every crop with one taken from perturb(img).
  bool perturb_crops = false;
  PerturbOptions perturb;
  /// With `strict`, fewer than two images or constant predictions throw
  /// Error(kUndefinedCorrelation); otherwise correlations fall back to 0.
  bool strict = false;
};

/// Greedy rollouts on every image.
EvalReport evaluate(const PolicyParams& params,
                    std::span<const SynthImage> images, std::uint64_t seed,
                    const EvalOptions& options = {});

/// Clean and perturbed-crop reports over the same images.
std::pair<EvalReport, EvalReport> evidence_perturb_eval(
    const PolicyParams& params, std::span<const SynthImage> images,
    std::uint64_t seed, const EvalOptions& options = {});

/// Localization accuracy of a random-tool baseline: for each image the
/// evaluated policy inspected, the same number of distinct cells is drawn
/// uniformly at random. Averaged over the same images as report.acc_loc.
double random_tool_acc_loc(const EvalReport& report,
                           std::span<const SynthImage> images,
                           std::uint64_t seed);

}  // namespace iqa
