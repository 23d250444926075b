// SPDX-License-Identifier: Apache-2.0
//
// Perceptual curriculum reward: bounded score rewards whose error
// sensitivity k(t) follows a logistic schedule, a format reward for tool use,
// and static baselines for ablations.
#pragma once

#include <span>
#include <string>
#include <string_view>

namespace iqa {

struct Trajectory;

struct RewardSchedule {
  double k_min = 5.0;
  double k_max = 25.0;
  double tau = 0.5;
  double steepness = 10.0;
  int total_steps = 2000;

  void validate() const;
};

enum class RewardShape { kSigmoid, kExponential, kBinary, kFixedGauss };

const char* to_string(RewardShape shape);
RewardShape reward_shape_from_string(std::string_view name);

struct RewardConfig {
  RewardShape shape = RewardShape::kExponential;
  double epsilon = 1e-4;
  double lambda_fmt = 0.5;
  /// Sharpness of the fixed_gauss baseline.
  double k_fixed = 15.0;
  /// Binary baseline pays 1 when e <= binary_threshold.
  double binary_threshold = 0.25;
  /// Weight of the pairwise rank bonus (ablation stand-in; 0 disables).
  double rank_weight = 0.0;
  RewardSchedule schedule;

  void validate() const;
};

/// k(t) = k_min + (k_max - k_min) * sigmoid(s * (t/T - tau)), t clamped to
/// [0, T].
double sharpness(const RewardSchedule& schedule, int t);

/// Score reward of squared error `e` at sharpness `k`.
double score_reward_at(const RewardConfig& config, double k, double e);

/// Score reward at training step `t` for target `y` and prediction `y_hat`.
double score_reward(const RewardConfig& config, int t, double y,
                    double y_hat);

/// +1 for a served tool call followed by a score token, 0 without tool use,
/// -1 when the trajectory never emitted a score.
double format_reward(const Trajectory& traj);

/// R = R_score + lambda * r_fmt; R_score is 0 without a prediction.
double total_reward(const RewardConfig& config, int t, const Trajectory& traj,
                    double y);

/// Pairwise rank-correctness bonus in [0, 1]: fraction of reference pairs
/// (y_ref, y_hat_ref) whose ordering against (y, y_hat) the prediction gets
/// right. Pairs with equal targets are skipped; returns 0 without pairs.
double rank_bonus(double y, double y_hat, std::span<const double> y_ref,
                  std::span<const double> y_hat_ref);

}  // namespace iqa
