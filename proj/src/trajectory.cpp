// SPDX-License-Identifier: Apache-2.0
#include "iqa/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "iqa/error.hpp"

namespace iqa {

namespace vocab {

ActionKind kind_of(int id) {
  if (id < 0 || id >= kSize) {
    throw Error(ErrorCode::kInvalidArgument,
                "action id " + std::to_string(id) + " outside vocabulary");
  }
  if (id < kToolBegin) return ActionKind::kAnalyze;
  if (id < kScoreBegin) return ActionKind::kTool;
  return ActionKind::kScore;
}

int bin_of(double y) {
  const double clamped = std::clamp(y, 1.0, 5.0);
  return std::min(static_cast<int>((clamped - 1.0) / 0.25), kNumScore - 1);
}

}  // namespace vocab

BBox cell_bbox(int cell) {
  const int row = cell / kCellGrid;
  const int col = cell % kCellGrid;
  return {col * kCellSize, row * kCellSize, (col + 1) * kCellSize,
          (row + 1) * kCellSize};
}

std::array<double, kNumCells> global_view(const Grid& pixels) {
  const int half_w = pixels.width() / 2;
  const int half_h = pixels.height() / 2;
  Grid pooled(half_w, half_h);
  for (int y = 0; y < half_h; ++y) {
    for (int x = 0; x < half_w; ++x) {
      pooled.at(x, y) = 0.25 * (pixels.at(2 * x, 2 * y) +
                                pixels.at(2 * x + 1, 2 * y) +
                                pixels.at(2 * x, 2 * y + 1) +
                                pixels.at(2 * x + 1, 2 * y + 1));
    }
  }
  const Grid lap = laplacian(pooled);
  const int cell = kCellSize / 2;
  std::array<double, kNumCells> hints{};
  for (int c = 0; c < kNumCells; ++c) {
    const int x0 = (c % kCellGrid) * cell;
    const int y0 = (c / kCellGrid) * cell;
    double sum = 0.0;
    for (int y = y0; y < y0 + cell; ++y) {
      for (int x = x0; x < x0 + cell; ++x) sum += std::abs(lap.at(x, y));
    }
    hints[c] = kGlobalHintScale * sum / (cell * cell);
  }
  return hints;
}

Features State::features() const {
  Features f{};
  // Each hint is compared against a blend of the image's own mean hint and
  // the clean-background level, so the thumbnail says where to look more
  // clearly than how bad the image is.
  double mean = 0.0;
  for (double g : global) mean += g / kNumCells;
  const double ref = 0.5 * (mean + kHintFloor);
  for (int c = 0; c < kNumCells; ++c) {
    f[kGlobalOffset + c] = (global[c] - ref) / kHintSpread;
  }
  for (int s = 0; s < tool_calls; ++s) {
    for (int k = 0; k < 4; ++k) {
      f[kObsOffset + 4 * s + k] =
          (observations[s][k] - kObsCenter[k]) / kObsSpread[k];
    }
  }
  for (int h = 0; h < vocab::kNumAnalyze; ++h) {
    f[kHistoryOffset + h] = history[h] ? 1.0 : 0.0;
  }
  for (int c = 0; c < kNumCells; ++c) {
    if (visited[c]) f[kVisitedOffset + c] = 1.0;
  }
  return f;
}

State init_state(const Grid& global_pixels) {
  State s;
  s.global = global_view(global_pixels);
  return s;
}

const char* to_string(Role role) {
  switch (role) {
    case Role::kText: return "text";
    case Role::kToolCall: return "tool_call";
    case Role::kObservation: return "observation";
    case Role::kScore: return "score";
  }
  return "unknown";
}

StepResult step(const State& state, int action_id,
                const Grid& observation_source, bool room_for_observation) {
  if (state.terminal()) {
    throw Error(ErrorCode::kInvalidArgument, "step on a terminal state");
  }
  StepResult r{state, Role::kText, std::nullopt};
  switch (vocab::kind_of(action_id)) {
    case vocab::ActionKind::kAnalyze:
      r.next.history[action_id - vocab::kAnalyzeBegin] = true;
      break;
    case vocab::ActionKind::kTool: {
      if (state.tool_calls >= kMaxToolCalls || !room_for_observation) break;
      const int cell = vocab::tool_cell(action_id);
      const auto tile = crop(observation_source, cell_bbox(cell));
      if (!tile) break;
      const RegionFeatures feats = region_features(*tile);
      r.next.observations[state.tool_calls] = feats;
      r.next.tool_calls = state.tool_calls + 1;
      r.next.last_tool_cell = cell;
      r.next.visited[cell] = true;
      r.role = Role::kToolCall;
      r.observation = feats;
      break;
    }
    case vocab::ActionKind::kScore:
      r.next.score_bin = vocab::score_bin(action_id);
      r.role = Role::kScore;
      break;
  }
  return r;
}

ActionDraw greedy_by_kind(const PolicyParams& params, const Features& features,
                          Rng& tie_rng, bool tools_available) {
  const Logits z = logits(params, features);
  const Logits logp = log_softmax(z);
  // Exact ties are broken with tie_rng so an untrained policy is not biased
  // toward low action ids.
  auto pick = [&](const std::vector<int>& ties) {
    return ties.size() == 1 ? ties.front() : ties[tie_rng() % ties.size()];
  };
  constexpr int kBegin[3] = {vocab::kAnalyzeBegin, vocab::kToolBegin,
                             vocab::kScoreBegin};
  constexpr int kEnd[3] = {vocab::kToolBegin, vocab::kScoreBegin, vocab::kSize};
  double mass[3] = {0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    if (k == 1 && !tools_available) continue;
    for (int a = kBegin[k]; a < kEnd[k]; ++a) mass[k] += std::exp(logp[a]);
  }
  const double best_mass = *std::max_element(mass, mass + 3);
  std::vector<int> kinds;
  for (int k = 0; k < 3; ++k) {
    if (mass[k] == best_mass) kinds.push_back(k);
  }
  const int kind = pick(kinds);
  const double best =
      *std::max_element(z.begin() + kBegin[kind], z.begin() + kEnd[kind]);
  std::vector<int> ties;
  for (int a = kBegin[kind]; a < kEnd[kind]; ++a) {
    if (z[a] == best) ties.push_back(a);
  }
  const int chosen = pick(ties);
  return {chosen, logp[chosen]};
}

std::vector<int> Trajectory::visited_cells() const {
  std::vector<int> cells;
  for (const auto& t : tokens) {
    if (t.role == Role::kToolCall) cells.push_back(vocab::tool_cell(t.action_id));
  }
  return cells;
}

void Trajectory::validate(int max_len) const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "invalid trajectory: " + what);
  };
  if (static_cast<int>(tokens.size()) > max_len) fail("longer than max_len");
  int calls = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    const bool obs = t.role == Role::kObservation;
    if (obs != !t.loss_mask) fail("loss mask disagrees with role");
    if (obs == t.logprob_old.has_value()) fail("logprob presence disagrees");
    if (obs && (i == 0 || tokens[i - 1].role != Role::kToolCall)) {
      fail("observation not preceded by a tool call");
    }
    if (t.role == Role::kToolCall) ++calls;
    if (t.role == Role::kScore && i + 1 != tokens.size()) {
      fail("score token is not last");
    }
  }
  if (calls != tool_calls) fail("tool_calls count mismatch");
  if (tool_calls > kMaxToolCalls) fail("tool budget exceeded");
}

Trajectory rollout(const PolicyParams& params,
                   std::shared_ptr<const SynthImage> image, Rng& rng,
                   const RolloutOptions& options) {
  if (options.max_len < 2) {
    throw Error(ErrorCode::kInvalidArgument, "max_len must be >= 2");
  }
  const Grid& obs_source =
      options.observation_source ? *options.observation_source : image->pixels;
  Trajectory traj;
  traj.image = image;
  State state = init_state(image->pixels);
  while (static_cast<int>(traj.tokens.size()) < options.max_len &&
         !state.terminal()) {
    const Features f = state.features();
    const bool room =
        static_cast<int>(traj.tokens.size()) + 2 <= options.max_len;
    const bool tools_open = room && state.tool_calls < kMaxToolCalls;
    const ActionDraw draw = options.decoding == Decoding::kGreedy
                                ? greedy_by_kind(params, f, rng, tools_open)
                                : sample(params, f, rng);
    StepResult r = step(state, draw.action, obs_source, room);
    traj.tokens.push_back({draw.action, r.role, true, f, draw.logprob, {}});
    if (r.observation) {
      traj.tokens.push_back({draw.action, Role::kObservation, false,
                             r.next.features(), std::nullopt, r.observation});
      ++traj.tool_calls;
    }
    if (r.role == Role::kScore) {
      traj.predicted_score = vocab::bin_center(*r.next.score_bin);
    }
    state = std::move(r.next);
  }
  return traj;
}

std::vector<Trajectory> rollout_group(const PolicyParams& params,
                                      std::shared_ptr<const SynthImage> image,
                                      std::span<const std::uint64_t> seeds,
                                      const RolloutOptions& options,
                                      bool parallel) {
  std::vector<Trajectory> out(seeds.size());
  auto run = [&](std::size_t i) {
    Rng rng(seeds[i]);
    out[i] = rollout(params, image, rng, options);
    out[i].rollout_seed = seeds[i];
  };
  if (!parallel) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run(i);
    return out;
  }
  std::vector<std::jthread> workers;
  workers.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) workers.emplace_back(run, i);
  return out;
}

std::vector<std::size_t> generated_indices(const Trajectory& traj) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    if (traj.tokens[i].role != Role::kObservation) idx.push_back(i);
  }
  return idx;
}

std::vector<Features> replay_features(const Trajectory& traj,
                                      const Grid& global_source,
                                      const Grid& observation_source) {
  std::vector<Features> out;
  State state = init_state(global_source);
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    const auto& t = traj.tokens[i];
    if (t.role == Role::kObservation) continue;
    out.push_back(state.features());
    if (state.terminal()) break;
    // A tool token recorded as text was rejected during the rollout.
    const bool room = t.role == Role::kToolCall;
    StepResult r = step(state, t.action_id, observation_source, room);
    state = std::move(r.next);
  }
  return out;
}

}  // namespace iqa
