// SPDX-License-Identifier: Apache-2.0
#include "iqa/reward.hpp"

#include <algorithm>
#include <cmath>

#include "iqa/error.hpp"
#include "iqa/trajectory.hpp"

namespace iqa {

void RewardSchedule::validate() const {
  if (!(k_min < k_max)) {
    throw Error(ErrorCode::kConfig, "reward schedule needs k_min < k_max");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error(ErrorCode::kConfig, "reward schedule tau must be in (0, 1)");
  }
  if (!(steepness > 0.0)) {
    throw Error(ErrorCode::kConfig, "reward schedule steepness must be > 0");
  }
  if (total_steps < 1) {
    throw Error(ErrorCode::kConfig, "reward schedule needs total_steps >= 1");
  }
}

void RewardConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kConfig, "epsilon must be > 0");
  if (!(lambda_fmt >= 0.0)) {
    throw Error(ErrorCode::kConfig, "lambda_fmt must be >= 0");
  }
  if (!(rank_weight >= 0.0)) {
    throw Error(ErrorCode::kConfig, "rank_weight must be >= 0");
  }
  if (shape == RewardShape::kSigmoid || shape == RewardShape::kExponential) {
    schedule.validate();
  }
}

const char* to_string(RewardShape shape) {
  switch (shape) {
    case RewardShape::kSigmoid: return "sigmoid";
    case RewardShape::kExponential: return "exponential";
    case RewardShape::kBinary: return "binary";
    case RewardShape::kFixedGauss: return "fixed_gauss";
  }
  return "unknown";
}

RewardShape reward_shape_from_string(std::string_view name) {
  if (name == "sigmoid") return RewardShape::kSigmoid;
  if (name == "exponential") return RewardShape::kExponential;
  if (name == "binary") return RewardShape::kBinary;
  if (name == "fixed_gauss") return RewardShape::kFixedGauss;
  throw Error(ErrorCode::kConfig,
              "unknown reward shape '" + std::string(name) + "'");
}

double sharpness(const RewardSchedule& s, int t) {
  const int tc = std::clamp(t, 0, s.total_steps);
  const double x = s.steepness * (static_cast<double>(tc) / s.total_steps -
                                  s.tau);
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return s.k_min + (s.k_max - s.k_min) * sig;
}

double score_reward_at(const RewardConfig& config, double k, double e) {
  switch (config.shape) {
    case RewardShape::kSigmoid:
      return 2.0 / (1.0 + std::exp(k * e));
    case RewardShape::kExponential:
      return std::exp(-k * e) + config.epsilon;
    case RewardShape::kBinary:
      return e <= config.binary_threshold ? 1.0 : 0.0;
    case RewardShape::kFixedGauss:
      return std::exp(-config.k_fixed * e);
  }
  return 0.0;
}

double score_reward(const RewardConfig& config, int t, double y,
                    double y_hat) {
  const double e = (y_hat - y) * (y_hat - y);
  return score_reward_at(config, sharpness(config.schedule, t), e);
}

double format_reward(const Trajectory& traj) {
  if (traj.malformed()) return -1.0;
  return traj.tool_calls >= 1 ? 1.0 : 0.0;
}

double total_reward(const RewardConfig& config, int t, const Trajectory& traj,
                    double y) {
  const double r_score =
      traj.predicted_score ? score_reward(config, t, y, *traj.predicted_score)
                           : 0.0;
  return r_score + config.lambda_fmt * format_reward(traj);
}

double rank_bonus(double y, double y_hat, std::span<const double> y_ref,
                  std::span<const double> y_hat_ref) {
  int pairs = 0;
  int correct = 0;
  for (std::size_t i = 0; i < y_ref.size(); ++i) {
    if (y_ref[i] == y) continue;
    ++pairs;
    if ((y - y_ref[i]) * (y_hat - y_hat_ref[i]) > 0.0) ++correct;
  }
  return pairs == 0 ? 0.0 : static_cast<double>(correct) / pairs;
}

}  // namespace iqa
