// SPDX-License-Identifier: Apache-2.0
//
// Group-relative policy optimization with the masked clipped objective,
// its analytic gradient, Adam, and the training loop.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "iqa/egf.hpp"
#include "iqa/metrics.hpp"
#include "iqa/policy.hpp"
#include "iqa/reward.hpp"
#include "iqa/trajectory.hpp"

namespace iqa {

struct TrainConfig {
  double clip_eps = 0.2;
  double beta_kl = 1e-3;
  double lr = 1e-2;
  int epochs = 10;
  int steps_per_epoch = 200;
  int group_size = 8;
  RewardConfig reward;
  bool egf_enabled = true;
  double k_pct = 0.4;
  bool always_pivot_score = true;
  /// Divide each trajectory's sum by its masked-token count instead of
  /// |O_i| (ablation switch).
  bool normalize_by_masked = false;
  int perturb_samples = 1;
  int max_len = 24;
  /// Reserved for a tanh hidden layer; only `false` is supported.
  bool hidden_layer = false;
  /// Maximum number of distortion patches per training image; the count is
  /// drawn uniformly from [0, max_patches].
  int max_patches = kMaxPatches;
  /// Held-out images for the before/after evaluation in the report.
  int eval_images = 200;
  bool parallel_rollouts = false;

  int total_steps() const { return epochs * steps_per_epoch; }
  void validate() const;
};

struct GroupBatch {
  std::shared_ptr<const SynthImage> image;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<PivotalMask> masks;
};

struct ObjectiveOptions {
  double clip_eps = 0.2;
  double beta_kl = 1e-3;
  bool normalize_by_masked = false;
};

/// (R_i - mean) / (population std + 1e-8); all zeros for identical rewards.
std::vector<double> group_advantages(std::span<const double> rewards);

/// exp(logprob_new - logprob_old) at a generated position. Throws
/// Error(kInvalidArgument) at observation positions.
double importance_ratio(const PolicyParams& params, const Trajectory& traj,
                        std::size_t position);

/// (1/G) sum_i (1/|O_i|) sum_t m_it min(r A, clip(r, 1-eps, 1+eps) A)
///   - beta * mean over generated positions of KL(pi_theta || pi_ref).
double objective(const PolicyParams& params, const PolicyParams& reference,
                 const GroupBatch& batch, const ObjectiveOptions& options);

/// Exact gradient of `objective`; where the clipped arm is strictly the
/// minimum the surrogate contributes nothing.
std::vector<double> objective_gradient(const PolicyParams& params,
                                       const PolicyParams& reference,
                                       const GroupBatch& batch,
                                       const ObjectiveOptions& options);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int t = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// One bias-corrected Adam ascent step: params += lr * m_hat / (sqrt(v_hat)
/// + eps).
void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& state, double lr);

struct StepLog {
  int step = 0;
  double k_t = 0.0;
  double mean_reward = 0.0;
  /// Mean squared error over trajectories that emitted a score (NaN if
  /// none did).
  double mean_e = 0.0;
  double frac_tool_use = 0.0;
  double objective = 0.0;
};

struct TrainingReport {
  std::vector<StepLog> curve;
  PolicyParams params;
  std::uint64_t seed = 0;
  int steps = 0;
  EvalReport untrained;
  EvalReport trained;
};

/// Builds the batch for one step: rollouts, rewards, advantages and masks.
GroupBatch build_group(const PolicyParams& params, const TrainConfig& config,
                       std::uint64_t seed, int step);

struct TrainHooks {
  /// Called after every optimizer step with the updated parameters.
  std::function<void(const StepLog&, const PolicyParams&, const GroupBatch&)>
      on_step;
};

/// Deterministic for a fixed (config, seed). Throws Error(kNonFinite) when
/// the objective or the parameters become non-finite.
TrainingReport train(const TrainConfig& config, std::uint64_t seed,
                     const TrainHooks& hooks = {});

}  // namespace iqa
