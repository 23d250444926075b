// SPDX-License-Identifier: Apache-2.0
//
// The interleaved rollout MDP: action vocabulary, state accumulation, the crop
// tool with its 3-call budget, and loss-mask bookkeeping.
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "iqa/policy.hpp"
#include "iqa/rng.hpp"
#include "iqa/synthenv.hpp"

namespace iqa {

namespace vocab {
inline constexpr int kNumAnalyze = 8;
inline constexpr int kNumTool = 16;
inline constexpr int kNumScore = 16;
inline constexpr int kAnalyzeBegin = 0;
inline constexpr int kToolBegin = kAnalyzeBegin + kNumAnalyze;
inline constexpr int kScoreBegin = kToolBegin + kNumTool;
inline constexpr int kSize = kScoreBegin + kNumScore;
static_assert(kSize == kNumActions);

enum class ActionKind { kAnalyze, kTool, kScore };

ActionKind kind_of(int action_id);
inline bool is_tool(int id) { return kToolBegin <= id && id < kScoreBegin; }
inline bool is_score(int id) { return kScoreBegin <= id && id < kSize; }
inline int tool_cell(int id) { return id - kToolBegin; }
inline int tool_token(int cell) { return kToolBegin + cell; }
inline int score_bin(int id) { return id - kScoreBegin; }
inline int score_token(int bin) { return kScoreBegin + bin; }

/// Prediction of score bin b: 1 + (b + 0.5) * 4/16.
inline double bin_center(int bin) { return 1.0 + (bin + 0.5) * 0.25; }
/// Bin containing y (clamped to [1, 5]).
int bin_of(double y);
}  // namespace vocab

inline constexpr int kMaxToolCalls = 3;
inline constexpr int kCellGrid = 4;
inline constexpr int kCellSize = kImageSize / kCellGrid;
inline constexpr int kNumCells = kCellGrid * kCellGrid;

/// Pixel box of crop-grid cell `cell` (row-major over the 4x4 grid).
BBox cell_bbox(int cell);

// Feature layout of the 52-dim state vector.
inline constexpr int kGlobalOffset = 0;     // 16 per-cell global-view hints
inline constexpr int kObsOffset = 16;       // 3 slots x region_features
inline constexpr int kHistoryOffset = 28;   // 8 analyze-token indicators
inline constexpr int kVisitedOffset = 36;   // 16 visited-cell indicators
static_assert(kVisitedOffset + kNumCells == kFeatureDim);

/// Global view of an image as seen before any zoom: the image is 2x2
/// average-pooled to 16x16 and, per crop-grid cell, the mean |Laplacian| of
/// the pooled image is reported, scaled by kGlobalHintScale.
inline constexpr double kGlobalHintScale = 4.0;
std::array<double, kNumCells> global_view(const Grid& pixels);

// Fixed affine standardization applied when featurizing. Observation
// centers are typical clean-cell values except for the mean, which is left
// uncentered so a filled slot is distinguishable from an empty one.
inline constexpr double kHintFloor = 0.12;
inline constexpr double kHintSpread = 0.5;
inline constexpr std::array<double, 4> kObsCenter{0.0, 0.004, 0.012, 0.24};
inline constexpr std::array<double, 4> kObsSpread{0.1, 0.01, 0.1, 0.15};

struct State {
  std::array<double, kNumCells> global{};
  std::array<RegionFeatures, kMaxToolCalls> observations{};
  std::array<bool, vocab::kNumAnalyze> history{};
  int last_tool_cell = -1;
  std::array<bool, kNumCells> visited{};
  int tool_calls = 0;
  std::optional<int> score_bin;

  bool terminal() const { return score_bin.has_value(); }
  Features features() const;
};

State init_state(const Grid& global_pixels);
inline State init_state(const SynthImage& img) {
  return init_state(img.pixels);
}

enum class Role { kText, kToolCall, kObservation, kScore };
const char* to_string(Role role);

struct StepResult {
  State next;
  /// Role of the generated token.
  Role role = Role::kText;
  /// Crop features when the tool call was served.
  std::optional<RegionFeatures> observation;
};

/// Applies a generated action. Tool calls crop `observation_source`; a tool
/// call past the budget (or without room for its observation) is recorded as
/// a plain text token and leaves the state unchanged apart from bookkeeping.
StepResult step(const State& state, int action_id,
                const Grid& observation_source,
                bool room_for_observation = true);

struct TokenRecord {
  int action_id = 0;
  Role role = Role::kText;
  bool loss_mask = true;
  Features state_features{};
  std::optional<double> logprob_old;
  /// Crop features carried by observation records.
  std::optional<RegionFeatures> observation;
};

struct Trajectory {
  std::vector<TokenRecord> tokens;
  std::shared_ptr<const SynthImage> image;
  int tool_calls = 0;
  std::optional<double> predicted_score;
  std::uint64_t rollout_seed = 0;
  double reward = 0.0;
  double k_t = 0.0;

  bool malformed() const { return !predicted_score.has_value(); }
  /// Cells of served tool calls, in call order.
  std::vector<int> visited_cells() const;
  /// Checks every structural invariant; throws Error(kInvalidArgument).
  void validate(int max_len) const;
};

enum class Decoding { kSample, kGreedy };

/// Greedy decoding in two stages, the way a language model commits to a
/// structural token before its argument: the action kind (analyze, tool,
/// score) with the largest total probability, then the most likely action
/// of that kind. Tool calls are not considered once `tools_available` is
/// false (budget spent or no room left for the observation).
ActionDraw greedy_by_kind(const PolicyParams& params, const Features& features,
                          Rng& tie_rng, bool tools_available = true);

struct RolloutOptions {
  int max_len = 24;
  Decoding decoding = Decoding::kSample;
  /// Crops are taken from this grid instead of the image pixels when set
  /// (evidence-perturbation evaluation).
  const Grid* observation_source = nullptr;
};

Trajectory rollout(const PolicyParams& params,
                   std::shared_ptr<const SynthImage> image, Rng& rng,
                   const RolloutOptions& options = {});

/// G independent rollouts, rollout i seeded with seeds[i]. With
/// `parallel` the trajectories are generated on separate threads; the
/// result is identical either way.
std::vector<Trajectory> rollout_group(const PolicyParams& params,
                                      std::shared_ptr<const SynthImage> image,
                                      std::span<const std::uint64_t> seeds,
                                      const RolloutOptions& options = {},
                                      bool parallel = false);

/// Positions of generated (non-observation) records, in order.
std::vector<std::size_t> generated_indices(const Trajectory& traj);

/// State features at every generated position, rebuilt by replaying the
/// trajectory's actions with the global view taken from `global_source` and
/// crops from `observation_source`.
std::vector<Features> replay_features(const Trajectory& traj,
                                      const Grid& global_source,
                                      const Grid& observation_source);

}  // namespace iqa
