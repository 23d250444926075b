// SPDX-License-Identifier: Apache-2.0
#include "iqa/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "iqa/error.hpp"
#include "iqa/rng.hpp"

namespace iqa {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) {
    throw Error(ErrorCode::kConfig, "invalid train config: " + what);
  };
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) bad("clip_eps must be in (0, 1)");
  if (!(beta_kl >= 0.0)) bad("beta_kl must be >= 0");
  if (!(lr > 0.0)) bad("lr must be > 0");
  if (epochs < 0 || steps_per_epoch < 0) bad("negative step counts");
  if (group_size < 2) bad("group_size must be >= 2");
  if (!(k_pct > 0.0 && k_pct <= 1.0)) bad("k_pct must be in (0, 1]");
  if (perturb_samples < 1) bad("perturb_samples must be >= 1");
  if (max_len < 2) bad("max_len must be >= 2");
  if (max_patches < 0 || max_patches > kMaxPatches) {
    bad("max_patches must be in [0, 4]");
  }
  if (eval_images < 0) bad("eval_images must be >= 0");
  if (hidden_layer) bad("hidden_layer is reserved; only false is supported");
  reward.validate();
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  const double n = static_cast<double>(rewards.size());
  std::vector<double> adv(rewards.size(), 0.0);
  if (rewards.empty()) return adv;
  // Identical rewards carry no signal; return exact zeros rather than
  // rounding noise divided by the stabilizer.
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return adv;
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - mean) / (sd + 1e-8);
  }
  return adv;
}

double importance_ratio(const PolicyParams& params, const Trajectory& traj,
                        std::size_t position) {
  const auto& t = traj.tokens.at(position);
  if (t.role == Role::kObservation || !t.logprob_old) {
    throw Error(ErrorCode::kInvalidArgument,
                "importance ratio requested at an observation position");
  }
  return std::exp(logprob(params, t.state_features, t.action_id) -
                  *t.logprob_old);
}

namespace {

struct TrajectoryNorm {
  std::vector<std::size_t> generated;
  double denom = 0.0;
};

TrajectoryNorm norm_of(const Trajectory& traj, const PivotalMask& mask,
                       bool by_masked) {
  TrajectoryNorm n;
  n.generated = generated_indices(traj);
  if (by_masked) {
    for (std::size_t pos : n.generated) n.denom += mask.mask.at(pos);
  } else {
    n.denom = static_cast<double>(n.generated.size());
  }
  return n;
}

void check_batch(const GroupBatch& batch) {
  const std::size_t g = batch.trajectories.size();
  if (g == 0 || batch.advantages.size() != g || batch.masks.size() != g) {
    throw Error(ErrorCode::kInvalidArgument,
                "group batch needs one advantage and mask per trajectory");
  }
}

}  // namespace

double objective(const PolicyParams& params, const PolicyParams& reference,
                 const GroupBatch& batch, const ObjectiveOptions& options) {
  check_batch(batch);
  const double g = static_cast<double>(batch.trajectories.size());
  double surrogate = 0.0;
  double kl_sum = 0.0;
  std::size_t kl_count = 0;
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& traj = batch.trajectories[i];
    const auto& mask = batch.masks[i];
    const double adv = batch.advantages[i];
    const TrajectoryNorm norm = norm_of(traj, mask, options.normalize_by_masked);
    double term = 0.0;
    for (std::size_t pos : norm.generated) {
      const auto& tok = traj.tokens[pos];
      if (options.beta_kl != 0.0) {
        kl_sum += kl_exact(params, reference, tok.state_features);
      }
      ++kl_count;
      if (!mask.mask.at(pos)) continue;
      const double r = importance_ratio(params, traj, pos);
      const double clipped =
          std::clamp(r, 1.0 - options.clip_eps, 1.0 + options.clip_eps);
      term += std::min(r * adv, clipped * adv);
    }
    if (norm.denom > 0.0) surrogate += term / norm.denom;
  }
  double value = surrogate / g;
  if (options.beta_kl != 0.0 && kl_count > 0) {
    value -= options.beta_kl * kl_sum / static_cast<double>(kl_count);
  }
  return value;
}

std::vector<double> objective_gradient(const PolicyParams& params,
                                       const PolicyParams& reference,
                                       const GroupBatch& batch,
                                       const ObjectiveOptions& options) {
  check_batch(batch);
  std::vector<double> grad(kNumParams, 0.0);
  const double g = static_cast<double>(batch.trajectories.size());
  std::size_t kl_count = 0;
  for (const auto& traj : batch.trajectories) {
    kl_count += generated_indices(traj).size();
  }
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& traj = batch.trajectories[i];
    const auto& mask = batch.masks[i];
    const double adv = batch.advantages[i];
    const TrajectoryNorm norm = norm_of(traj, mask, options.normalize_by_masked);
    for (std::size_t pos : norm.generated) {
      const auto& tok = traj.tokens[pos];
      if (options.beta_kl != 0.0) {
        accumulate_grad_kl(params, reference, tok.state_features,
                           -options.beta_kl / static_cast<double>(kl_count),
                           grad);
      }
      if (!mask.mask.at(pos) || norm.denom == 0.0 || adv == 0.0) continue;
      const double r = importance_ratio(params, traj, pos);
      const double clipped =
          std::clamp(r, 1.0 - options.clip_eps, 1.0 + options.clip_eps);
      // The clipped arm is flat in theta; it only matters when it is the
      // strict minimum.
      if (clipped * adv < r * adv) continue;
      accumulate_grad_logprob(params, tok.state_features, tok.action_id,
                              adv * r / (norm.denom * g), grad);
    }
  }
  return grad;
}

void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& state, double lr) {
  if (grad.size() != params.size()) {
    throw Error(ErrorCode::kInvalidArgument, "adam: dimension mismatch");
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(kAdamBeta1, state.t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grad[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] += lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

namespace {

struct RankReference {
  std::deque<double> y;
  std::deque<double> y_hat;
};

constexpr std::size_t kRankHistory = 8;

GroupBatch build_group_impl(const PolicyParams& params,
                            const TrainConfig& config, std::uint64_t seed,
                            int step, const RankReference* ranks) {
  Rng count_rng(derive_seed(seed, "env-count", step));
  const int patches = uniform_int(count_rng, 0, config.max_patches);
  auto image = std::make_shared<const SynthImage>(
      generate(derive_seed(seed, "env", step), patches));
  const double y = true_score(*image);

  GroupBatch batch;
  batch.image = image;
  std::vector<std::uint64_t> seeds(config.group_size);
  const std::uint64_t step_seed = derive_seed(seed, "rollout", step);
  for (int i = 0; i < config.group_size; ++i) {
    seeds[i] = derive_seed(step_seed, "member", i);
  }
  RolloutOptions ro;
  ro.max_len = config.max_len;
  batch.trajectories =
      rollout_group(params, image, seeds, ro, config.parallel_rollouts);

  const double k_t = sharpness(config.reward.schedule, step);
  std::vector<double> ref_y, ref_y_hat;
  if (ranks) {
    ref_y.assign(ranks->y.begin(), ranks->y.end());
    ref_y_hat.assign(ranks->y_hat.begin(), ranks->y_hat.end());
  }
  for (auto& traj : batch.trajectories) {
    double r = total_reward(config.reward, step, traj, y);
    if (config.reward.rank_weight > 0.0 && traj.predicted_score) {
      r += config.reward.rank_weight *
           rank_bonus(y, *traj.predicted_score, ref_y, ref_y_hat);
    }
    traj.reward = r;
    traj.k_t = k_t;
    batch.rewards.push_back(r);
  }
  batch.advantages = group_advantages(batch.rewards);

  EgfOptions egf;
  egf.k_pct = config.k_pct;
  egf.always_pivot_score = config.always_pivot_score;
  egf.perturb_samples = config.perturb_samples;
  const std::uint64_t perturb_seed = derive_seed(seed, "perturb", step);
  for (int i = 0; i < config.group_size; ++i) {
    const auto& traj = batch.trajectories[i];
    if (!config.egf_enabled) {
      batch.masks.push_back(full_mask(traj));
      continue;
    }
    const DependencyProfile profile = dependency_scores(
        params, traj, *image, derive_seed(perturb_seed, "member", i), egf);
    const auto pivotal =
        select_pivotal(profile, config.k_pct, config.always_pivot_score);
    batch.masks.push_back(build_mask(traj, pivotal, config.always_pivot_score));
  }
  return batch;
}

}  // namespace

GroupBatch build_group(const PolicyParams& params, const TrainConfig& config,
                       std::uint64_t seed, int step) {
  return build_group_impl(params, config, seed, step, nullptr);
}

TrainingReport train(const TrainConfig& config_in, std::uint64_t seed,
                     const TrainHooks& hooks) {
  TrainConfig config = config_in;
  config.validate();
  const int total = config.total_steps();
  config.reward.schedule.total_steps = std::max(total, 1);

  TrainingReport report;
  report.seed = seed;
  report.steps = total;
  const PolicyParams reference;  // zero init, frozen
  PolicyParams params = reference;

  const auto heldout = heldout_images(derive_seed(seed, "heldout"),
                                      config.eval_images);
  const std::uint64_t eval_seed = derive_seed(seed, "heldout-eval");
  EvalOptions eo;
  eo.max_len = config.max_len;
  if (!heldout.empty()) report.untrained = evaluate(params, heldout, eval_seed, eo);

  const ObjectiveOptions oo{config.clip_eps, config.beta_kl,
                            config.normalize_by_masked};
  AdamState adam;
  RankReference ranks;
  for (int step = 0; step < total; ++step) {
    GroupBatch batch = build_group_impl(params, config, seed, step, &ranks);
    const double obj = objective(params, reference, batch, oo);
    if (!std::isfinite(obj)) {
      throw Error(ErrorCode::kNonFinite,
                  "non-finite objective at step " + std::to_string(step));
    }
    const auto grad = objective_gradient(params, reference, batch, oo);
    adam_step(params.flat, grad, adam, config.lr);
    if (!params.all_finite()) {
      throw Error(ErrorCode::kNonFinite,
                  "non-finite parameters after step " + std::to_string(step));
    }

    StepLog log;
    log.step = step;
    log.k_t = batch.trajectories.front().k_t;
    log.objective = obj;
    double e_sum = 0.0;
    int scored = 0;
    int tool = 0;
    double y_hat_sum = 0.0;
    const double y = true_score(*batch.image);
    for (const auto& traj : batch.trajectories) {
      log.mean_reward += traj.reward;
      if (traj.tool_calls > 0) ++tool;
      if (traj.predicted_score) {
        const double d = *traj.predicted_score - y;
        e_sum += d * d;
        y_hat_sum += *traj.predicted_score;
        ++scored;
      }
    }
    const double g = static_cast<double>(batch.trajectories.size());
    log.mean_reward /= g;
    log.frac_tool_use = tool / g;
    log.mean_e = scored > 0 ? e_sum / scored
                            : std::numeric_limits<double>::quiet_NaN();
    if (scored > 0) {
      ranks.y.push_back(y);
      ranks.y_hat.push_back(y_hat_sum / scored);
      if (ranks.y.size() > kRankHistory) {
        ranks.y.pop_front();
        ranks.y_hat.pop_front();
      }
    }
    report.curve.push_back(log);
    if (hooks.on_step) hooks.on_step(log, params, batch);
  }
  report.params = params;
  if (!heldout.empty()) report.trained = evaluate(params, heldout, eval_seed, eo);
  return report;
}

}  // namespace iqa
