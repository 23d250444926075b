// SPDX-License-Identifier: Apache-2.0
#include "iqa/pig.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "iqa/error.hpp"
#include "iqa/rng.hpp"
#include "iqa/trajectory.hpp"

namespace iqa {

double artifact_threshold(std::uint64_t seed, int n_images, double q) {
  std::vector<double> values;
  for (int i = 0; i < n_images; ++i) {
    const SynthImage img = generate(derive_seed(seed, "clean", i), 0);
    for (int c = 0; c < kNumCells; ++c) {
      values.push_back(region_features(*crop(img, cell_bbox(c)))[2]);
    }
  }
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Diagnosis diagnose(const PolicyParams& critic, const SynthImage& img,
                   const PigOptions& options, std::uint64_t tie_seed) {
  Rng tie_rng(tie_seed);
  RolloutOptions ro;
  ro.max_len = options.max_len;
  ro.decoding = Decoding::kGreedy;
  const Trajectory traj =
      rollout(critic, std::make_shared<const SynthImage>(img), tie_rng, ro);
  if (!traj.predicted_score) {
    throw Error(ErrorCode::kCriticUnusable,
                "critic rollout ended without a score token");
  }
  Diagnosis d;
  d.y_hat = *traj.predicted_score;
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    const auto& t = traj.tokens[i];
    if (t.role != Role::kObservation) continue;
    const int cell = vocab::tool_cell(t.action_id);
    d.visited_cells.push_back(cell);
    if ((*t.observation)[2] > options.artifact_threshold &&
        std::find(d.flagged_cells.begin(), d.flagged_cells.end(), cell) ==
            d.flagged_cells.end()) {
      d.flagged_cells.push_back(cell);
    }
  }
  d.verdict = d.y_hat >= options.stop_threshold ? Verdict::kSatisfactory
                                                : Verdict::kNeedsEdit;
  return d;
}

EditInstruction make_instruction(const Diagnosis& diagnosis, double strength) {
  return {diagnosis.flagged_cells, strength};
}

SynthImage edit(const SynthImage& img, const EditInstruction& instruction) {
  if (!(instruction.strength > 0.0 && instruction.strength <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "edit strength must be in (0, 1]");
  }
  std::vector<bool> target(kNumCells, false);
  for (int c : instruction.target_cells) {
    if (c < 0 || c >= kNumCells) {
      throw Error(ErrorCode::kInvalidArgument, "edit target outside grid");
    }
    target[c] = true;
  }
  auto touches_target = [&](const BBox& b) {
    for (int c = 0; c < kNumCells; ++c) {
      if (target[c] && b.intersect(cell_bbox(c))) return true;
    }
    return false;
  };

  SynthImage out = img;
  out.patches.clear();
  bool changed = false;
  for (const auto& p : img.patches) {
    if (p.intensity == 0.0 || !touches_target(p.bbox)) {
      out.patches.push_back(p);
      continue;
    }
    // Cut the patch along the cell grid; pieces keep the texture seed so
    // untouched pieces render exactly as before.
    for (int c = 0; c < kNumCells; ++c) {
      const auto piece = p.bbox.intersect(cell_bbox(c));
      if (!piece) continue;
      DistortionPatch q = p;
      q.bbox = *piece;
      if (target[c]) {
        q.intensity = p.intensity * (1.0 - instruction.strength);
        changed = true;
      }
      out.patches.push_back(q);
    }
  }
  if (changed) {
    out.pixels = render(out.seed, out.patches, out.smoothing_passes);
  } else {
    out.patches = img.patches;
  }
  return out;
}

RefineResult refine_loop(const Critic& critic, const Editor& editor,
                         const SynthImage& img0, int k, double strength) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  RefineResult result;
  SynthImage current = img0;
  for (int round = 1; round <= k; ++round) {
    RefineRecord rec;
    try {
      rec.diagnosis = critic(current, round);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kCriticUnusable) throw;
      result.critic_failed = true;
      break;
    }
    rec.y_before = true_score(current);
    if (rec.diagnosis.verdict == Verdict::kSatisfactory) {
      rec.y_after = rec.y_before;
      result.history.push_back(std::move(rec));
      break;
    }
    EditInstruction instr = make_instruction(rec.diagnosis, strength);
    current = editor(current, instr);
    ++result.edits;
    rec.instruction = std::move(instr);
    rec.y_after = true_score(current);
    result.history.push_back(std::move(rec));
  }
  result.final_image = std::move(current);
  return result;
}

}  // namespace iqa
