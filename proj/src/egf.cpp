// SPDX-License-Identifier: Apache-2.0
#include "iqa/egf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iqa/error.hpp"
#include "iqa/rng.hpp"

namespace iqa {

std::size_t PivotalMask::count() const {
  return static_cast<std::size_t>(
      std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

DependencyProfile dependency_scores_against(const PolicyParams& params,
                                            const Trajectory& traj,
                                            const SynthImage& img,
                                            const SynthImage& perturbed) {
  DependencyProfile profile;
  profile.positions = generated_indices(traj);
  const auto clean = replay_features(traj, img.pixels, img.pixels);
  const auto dirty =
      replay_features(traj, perturbed.pixels, perturbed.pixels);
  profile.scores.resize(profile.positions.size());
  for (std::size_t k = 0; k < profile.positions.size(); ++k) {
    profile.scores[k] =
        kl_logits(logits(params, clean[k]), logits(params, dirty[k]));
  }
  if (!traj.tokens.empty() && traj.tokens.back().role == Role::kScore) {
    profile.score_position = traj.tokens.size() - 1;
  }
  return profile;
}

DependencyProfile dependency_scores(const PolicyParams& params,
                                    const Trajectory& traj,
                                    const SynthImage& img,
                                    std::uint64_t perturb_seed,
                                    const EgfOptions& options) {
  const int samples = std::max(options.perturb_samples, 1);
  DependencyProfile total;
  for (int s = 0; s < samples; ++s) {
    const std::uint64_t seed =
        s == 0 ? perturb_seed : derive_seed(perturb_seed, "egf-sample", s);
    const SynthImage perturbed = perturb(img, seed, options.perturb);
    DependencyProfile p =
        dependency_scores_against(params, traj, img, perturbed);
    if (s == 0) {
      total = std::move(p);
    } else {
      for (std::size_t k = 0; k < total.scores.size(); ++k) {
        total.scores[k] += p.scores[k];
      }
    }
  }
  if (samples > 1) {
    for (double& v : total.scores) v /= samples;
  }
  return total;
}

std::vector<std::size_t> select_pivotal(const DependencyProfile& profile,
                                        double k_pct, bool include_score) {
  if (!(k_pct > 0.0 && k_pct <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "k_pct must be in (0, 1]");
  }
  const std::size_t n = profile.scores.size();
  if (n == 0) return {};
  // Guard against k_pct * n landing a hair above an integer.
  const auto keep = static_cast<std::size_t>(
      std::ceil(k_pct * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return profile.scores[a] > profile.scores[b];
                   });
  std::vector<std::size_t> chosen;
  chosen.reserve(keep + 1);
  for (std::size_t k = 0; k < keep; ++k) {
    chosen.push_back(profile.positions[order[k]]);
  }
  if (include_score && profile.score_position &&
      std::find(chosen.begin(), chosen.end(), *profile.score_position) ==
          chosen.end()) {
    chosen.push_back(*profile.score_position);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

PivotalMask build_mask(const Trajectory& traj,
                       const std::vector<std::size_t>& pivotal,
                       bool force_score) {
  PivotalMask m;
  m.mask.assign(traj.tokens.size(), 0);
  for (std::size_t pos : pivotal) {
    if (pos < traj.tokens.size() &&
        traj.tokens[pos].role != Role::kObservation) {
      m.mask[pos] = 1;
    }
  }
  if (force_score && !traj.tokens.empty() &&
      traj.tokens.back().role == Role::kScore) {
    m.mask.back() = 1;
  }
  return m;
}

PivotalMask full_mask(const Trajectory& traj) {
  PivotalMask m;
  m.mask.reserve(traj.tokens.size());
  for (const auto& t : traj.tokens) m.mask.push_back(t.loss_mask ? 1 : 0);
  return m;
}

void split_by_phase(const Trajectory& traj, const DependencyProfile& profile,
                    PhaseScores& out) {
  bool tool_seen = false;
  std::size_t k = 0;
  for (std::size_t pos = 0; pos < traj.tokens.size(); ++pos) {
    const auto& t = traj.tokens[pos];
    if (t.role == Role::kObservation) continue;
    while (k < profile.positions.size() && profile.positions[k] < pos) ++k;
    if (k < profile.positions.size() && profile.positions[k] == pos) {
      const double s = profile.scores[k];
      if (pos > 0 && traj.tokens[pos - 1].role == Role::kObservation) {
        out.post_observation.push_back(s);
      } else if (!tool_seen && t.role == Role::kText) {
        out.pre_tool.push_back(s);
      }
    }
    if (t.role == Role::kToolCall) tool_seen = true;
  }
}

}  // namespace iqa
