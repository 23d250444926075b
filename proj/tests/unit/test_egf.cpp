// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "iqa/egf.hpp"
#include "iqa/grpo.hpp"

using namespace iqa;

namespace {

PolicyParams random_params(std::uint64_t seed, double scale) {
  Rng rng(seed);
  PolicyParams p;
  for (double& v : p.flat) v = uniform(rng, -scale, scale);
  return p;
}

Trajectory sampled(const PolicyParams& p, std::uint64_t seed, int patches) {
  auto img = std::make_shared<const SynthImage>(generate(seed, patches));
  Rng rng(derive_seed(seed, "test-rollout"));
  return rollout(p, img, rng);
}

// Top-k by descending score with ties to the earlier position, via a full
// comparison sort of (score, position) pairs.
std::vector<std::size_t> sort_oracle(const DependencyProfile& prof,
                                     std::size_t keep) {
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t k = 0; k < prof.scores.size(); ++k) {
    v.push_back({prof.scores[k], k});
  }
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < keep; ++k) out.push_back(prof.positions[v[k].second]);
  std::sort(out.begin(), out.end());
  return out;
}

DependencyProfile profile_of(std::vector<double> scores) {
  DependencyProfile p;
  p.scores = std::move(scores);
  for (std::size_t k = 0; k < p.scores.size(); ++k) p.positions.push_back(k);
  return p;
}

// Mean dependency of a policy over seeded trajectories, with the given
// perturbation intensity range.
double mean_dependency(const PolicyParams& p, double lo, double hi) {
  EgfOptions opt;
  opt.perturb.min_intensity = lo;
  opt.perturb.max_intensity = hi;
  double sum = 0;
  int n = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Trajectory t = sampled(p, 500 + s, 2);
    const auto prof = dependency_scores(p, t, *t.image, 900 + s, opt);
    for (double v : prof.scores) {
      sum += v;
      ++n;
    }
  }
  return sum / n;
}

}  // namespace

TEST_CASE("identical images give zero dependency") {
  const PolicyParams p = random_params(1, 0.5);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Trajectory t = sampled(p, s, 3);
    const auto prof = dependency_scores_against(p, t, *t.image, *t.image);
    CHECK(prof.positions == generated_indices(t));
    for (double v : prof.scores) CHECK(v == 0.0);
  }
}

TEST_CASE("image-blind policy has zero dependency") {
  PolicyParams p = random_params(2, 0.5);
  // Zero every weight on image-derived dims (global view and observations).
  for (int a = 0; a < kNumActions; ++a) {
    for (int j = kGlobalOffset; j < kHistoryOffset; ++j) p.weight(a, j) = 0.0;
  }
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Trajectory t = sampled(p, s, 2);
    const auto prof = dependency_scores(p, t, *t.image, 77 + s);
    for (double v : prof.scores) CHECK(std::abs(v) < 1e-15);
  }
}

TEST_CASE("dependency scores are nonnegative and aligned") {
  const PolicyParams p = random_params(3, 0.5);
  bool some_positive = false;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Trajectory t = sampled(p, s, 2);
    const auto prof = dependency_scores(p, t, *t.image, s);
    REQUIRE(prof.scores.size() == generated_indices(t).size());
    for (double v : prof.scores) {
      CHECK(v >= 0.0);
      some_positive |= v > 0.0;
    }
    // Matches a direct KL between replayed states.
    const SynthImage other = perturb(*t.image, s);
    const auto direct = dependency_scores_against(p, t, *t.image, other);
    CHECK(direct.scores == prof.scores);
    const auto a = replay_features(t, t.image->pixels, t.image->pixels);
    const auto b = replay_features(t, other.pixels, other.pixels);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(prof.scores[k] ==
            doctest::Approx(kl_logits(logits(p, a[k]), logits(p, b[k]))));
    }
  }
  CHECK(some_positive);
}

TEST_CASE("averaging over several perturbations") {
  const PolicyParams p = random_params(4, 0.5);
  const Trajectory t = sampled(p, 11, 2);
  EgfOptions opt;
  opt.perturb_samples = 3;
  const auto avg = dependency_scores(p, t, *t.image, 5, opt);
  const auto first = dependency_scores(p, t, *t.image, 5);
  const auto s1 = dependency_scores_against(
      p, t, *t.image, perturb(*t.image, derive_seed(5, "egf-sample", 1)));
  const auto s2 = dependency_scores_against(
      p, t, *t.image, perturb(*t.image, derive_seed(5, "egf-sample", 2)));
  for (std::size_t k = 0; k < avg.scores.size(); ++k) {
    CHECK(avg.scores[k] == doctest::Approx(
                               (first.scores[k] + s1.scores[k] + s2.scores[k]) / 3));
  }
}

TEST_CASE("select_pivotal counts and ties") {
  const auto prof = profile_of({0.3, 0.1, 0.9, 0.5, 0.2, 0.8, 0.0, 0.4, 0.7, 0.6});
  const auto top = select_pivotal(prof, 0.4);
  CHECK(top.size() == 4);
  CHECK(top == std::vector<std::size_t>{2, 5, 8, 9});

  const auto flat = profile_of(std::vector<double>(10, 0.25));
  CHECK(select_pivotal(flat, 0.4) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(select_pivotal(flat, 0.35) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(select_pivotal(profile_of({}), 0.4).empty());
  CHECK_THROWS(select_pivotal(flat, 0.0));
  CHECK_THROWS(select_pivotal(flat, 1.5));
}

TEST_CASE("select_pivotal adds the score token") {
  auto prof = profile_of({0.9, 0.8, 0.1, 0.0, 0.7});
  prof.score_position = 4;
  CHECK(select_pivotal(prof, 0.4) == std::vector<std::size_t>{0, 1, 4});
  prof.scores[4] = 0.0;
  CHECK(select_pivotal(prof, 0.4) == std::vector<std::size_t>{0, 1, 4});
  CHECK(select_pivotal(prof, 0.4, false) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("select_pivotal matches a sort oracle") {
  Rng rng(5);
  for (int c = 0; c < 200; ++c) {
    const int n = uniform_int(rng, 1, 30);
    std::vector<double> s(n);
    // Coarse values force ties.
    for (double& v : s) v = uniform_int(rng, 0, 6) * 0.1;
    auto prof = profile_of(s);
    // Spread positions as if observations sat in between.
    for (std::size_t k = 0; k < prof.positions.size(); ++k) prof.positions[k] = 2 * k;
    const double k_pct = uniform(rng, 0.05, 1.0);
    const auto keep = static_cast<std::size_t>(std::ceil(k_pct * n - 1e-9));
    CHECK(select_pivotal(prof, k_pct, false) == sort_oracle(prof, keep));
  }
}

TEST_CASE("masks never cover observations") {
  const PolicyParams p = random_params(6, 0.5);
  Rng rng(6);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Trajectory t = sampled(p, s, 3);
    // Random pivotal sets including observation positions.
    std::vector<std::size_t> k_set;
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      if (uniform01(rng) < 0.5) k_set.push_back(i);
    }
    for (bool force : {false, true}) {
      const PivotalMask m = build_mask(t, k_set, force);
      REQUIRE(m.mask.size() == t.tokens.size());
      std::size_t expected_count = 0;
      for (std::size_t i = 0; i < t.tokens.size(); ++i) {
        const bool obs = t.tokens[i].role == Role::kObservation;
        const bool in_set =
            std::find(k_set.begin(), k_set.end(), i) != k_set.end();
        const bool forced = force && t.tokens[i].role == Role::kScore;
        const int expected = !obs && (in_set || forced);
        CHECK(m.mask[i] == expected);
        expected_count += expected;
      }
      CHECK(m.count() == expected_count);
    }
  }
}

TEST_CASE("build_mask limits") {
  const PolicyParams p = random_params(7, 0.5);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Trajectory t = sampled(p, s, 2);
    const PivotalMask all = build_mask(t, generated_indices(t));
    CHECK(all.mask == full_mask(t).mask);
    const PivotalMask none = build_mask(t, {}, true);
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      CHECK(none.mask[i] == (t.tokens[i].role == Role::kScore ? 1 : 0));
    }
  }
}

TEST_CASE("phase split") {
  Trajectory t;
  auto add = [&](int id, Role r) {
    TokenRecord tok;
    tok.action_id = id;
    tok.role = r;
    t.tokens.push_back(tok);
  };
  add(1, Role::kText);           // pre-tool
  add(2, Role::kText);           // pre-tool
  add(9, Role::kToolCall);
  add(9, Role::kObservation);
  add(3, Role::kText);           // post-observation
  add(4, Role::kText);           // neither
  add(30, Role::kScore);
  DependencyProfile p;
  p.positions = {0, 1, 2, 4, 5, 6};
  p.scores = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  PhaseScores out;
  split_by_phase(t, p, out);
  CHECK(out.pre_tool == std::vector<double>{0.1, 0.2});
  CHECK(out.post_observation == std::vector<double>{0.4});
}

TEST_CASE("stronger perturbations raise the dependency of a trained policy") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.steps_per_epoch = 300;
  cfg.eval_images = 2;
  const TrainingReport rep = train(cfg, 3);
  const double weak = mean_dependency(rep.params, 0.1, 0.2);
  const double strong = mean_dependency(rep.params, 0.5, 0.7);
  MESSAGE("weak " << weak << " strong " << strong);
  CHECK(strong > weak);
}
