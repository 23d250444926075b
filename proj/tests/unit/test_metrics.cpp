// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "iqa/error.hpp"
#include "iqa/metrics.hpp"
#include "iqa/trajectory.hpp"
#include "oracles.hpp"

using namespace iqa;

namespace {

void expect_undefined(const std::vector<double>& x,
                      const std::vector<double>& y) {
  for (auto fn : {&plcc, &srcc}) {
    try {
      (void)fn(x, y);
      FAIL("expected an undefined correlation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUndefinedCorrelation);
    }
  }
}

BBox random_box(Rng& rng) {
  const int x0 = uniform_int(rng, 0, kImageSize - 1);
  const int y0 = uniform_int(rng, 0, kImageSize - 1);
  return {x0, y0, uniform_int(rng, x0 + 1, kImageSize),
          uniform_int(rng, y0 + 1, kImageSize)};
}

}  // namespace

TEST_CASE("correlation trivial cases") {
  const std::vector<double> x{1, 4, 2, 8, 5};
  std::vector<double> affine, neg;
  for (double v : x) {
    affine.push_back(2 * v + 3);
    neg.push_back(-v);
  }
  CHECK(plcc(x, affine) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(plcc(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(srcc(x, affine) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(srcc(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("undefined correlations") {
  expect_undefined({1.0}, {2.0});
  expect_undefined({1, 2, 3}, {1, 2});
  expect_undefined({1, 1, 1}, {1, 2, 3});
  expect_undefined({1, 2, 3}, {4, 4, 4});
}

TEST_CASE("average ranks with ties") {
  CHECK(average_ranks(std::vector<double>{1, 2, 2, 3}) ==
        std::vector<double>{1, 2.5, 2.5, 4});
  CHECK(average_ranks(std::vector<double>{5, 5, 5}) ==
        std::vector<double>{2, 2, 2});
  const std::vector<double> x{1, 2, 2, 3}, y{1, 3, 2, 4};
  CHECK(std::abs(srcc(x, y) - static_cast<double>(oracle::spearman(x, y))) < 1e-12);
}

TEST_CASE("correlations match brute force on random vectors with ties") {
  Rng rng(1);
  for (int c = 0; c < 100; ++c) {
    const int n = uniform_int(rng, 2, 60);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      // Half the cases draw from a small set so ties are common.
      x[i] = c % 2 ? uniform_int(rng, 0, 5) : uniform(rng, -3, 3);
      y[i] = c % 2 ? uniform_int(rng, 0, 5) + 0.5 * x[i] : uniform(rng, -3, 3);
    }
    const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (x_const || y_const) continue;
    CHECK(std::abs(plcc(x, y) - static_cast<double>(oracle::pearson(x, y))) < 1e-10);
    CHECK(std::abs(srcc(x, y) - static_cast<double>(oracle::spearman(x, y))) < 1e-10);
    CHECK(average_ranks(x) == oracle::average_ranks(x));
    // SRCC is PLCC of the rank vectors.
    CHECK(std::abs(srcc(x, y) - plcc(average_ranks(x), average_ranks(y))) < 1e-12);
    // Positive affine invariance.
    std::vector<double> x2;
    for (double v : x) x2.push_back(3.5 * v - 7);
    CHECK(std::abs(plcc(x2, y) - plcc(x, y)) < 1e-12);
    CHECK(srcc(x2, y) == srcc(x, y));
  }
}

TEST_CASE("acc_loc hand cases") {
  const std::vector<DistortionPatch> gt{
      {BBox{4, 4, 12, 8}, DistortionKind::kNoise, 0.5, 1},
      {BBox{20, 20, 24, 30}, DistortionKind::kBlur, 0.3, 2}};
  CHECK(acc_loc(std::vector<BBox>{{0, 0, 32, 32}}, gt) == 1.0);
  CHECK(acc_loc(std::vector<BBox>{{4, 4, 12, 8}, {20, 20, 24, 30}}, gt) == 1.0);
  CHECK(acc_loc(std::vector<BBox>{{0, 0, 4, 4}}, gt) == 0.0);
  CHECK(acc_loc(std::vector<BBox>{}, gt) == 0.0);

  const std::vector<DistortionPatch> one{
      {BBox{8, 8, 16, 16}, DistortionKind::kNoise, 0.5, 1}};
  CHECK(acc_loc(std::vector<BBox>{{8, 8, 12, 16}}, one) == 0.5);

  // Zero-intensity patches are not ground truth.
  const std::vector<DistortionPatch> none{
      {BBox{8, 8, 16, 16}, DistortionKind::kNoise, 0.0, 1}};
  CHECK_THROWS_AS(acc_loc(std::vector<BBox>{{0, 0, 4, 4}}, none), Error);
}

TEST_CASE("acc_loc matches per-pixel brute force exactly") {
  Rng rng(2);
  for (int c = 0; c < 100; ++c) {
    std::vector<DistortionPatch> gt;
    const int np = uniform_int(rng, 1, 4);
    for (int i = 0; i < np; ++i) {
      gt.push_back({random_box(rng), DistortionKind::kNoise, uniform(rng, 0.1, 1), 0});
    }
    std::vector<BBox> crops;
    const int nc = uniform_int(rng, 0, 4);
    for (int i = 0; i < nc; ++i) crops.push_back(random_box(rng));
    const double got = acc_loc(crops, gt);
    CHECK(got == oracle::acc_loc(crops, gt));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
    // Adding a crop never lowers coverage.
    crops.push_back(random_box(rng));
    CHECK(acc_loc(crops, gt) >= got);
  }
}

TEST_CASE("held-out images are seeded and respect patch bounds") {
  const auto a = heldout_images(9, 30, 1, 3);
  const auto b = heldout_images(9, 30, 1, 3);
  REQUIRE(a.size() == 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixels == b[i].pixels);
    CHECK(a[i].patches.size() >= 1);
    CHECK(a[i].patches.size() <= 3);
  }
}

TEST_CASE("evaluation is deterministic and aggregates per image") {
  Rng init(3);
  PolicyParams p;
  for (double& v : p.flat) v = uniform(init, -0.5, 0.5);
  for (int c = 0; c < kNumCells; ++c) p.bias(vocab::tool_token(c)) += 1.0;
  const auto imgs = heldout_images(4, 40);
  const EvalReport r1 = evaluate(p, imgs, 7);
  const EvalReport r2 = evaluate(p, imgs, 7);
  CHECK(r1.srcc == r2.srcc);
  CHECK(r1.plcc == r2.plcc);
  REQUIRE(r1.records.size() == 40);
  double loc = 0;
  int n_loc = 0;
  std::vector<double> y, y_hat;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const auto& rec = r1.records[i];
    CHECK(rec.cells == r2.records[i].cells);
    CHECK(rec.y == true_score(imgs[i]));
    y.push_back(rec.y);
    y_hat.push_back(rec.y_hat);
    if (!rec.cells.empty() && !imgs[i].patches.empty()) {
      std::vector<BBox> boxes;
      for (int c : rec.cells) boxes.push_back(cell_bbox(c));
      CHECK(rec.acc_loc == oracle::acc_loc(boxes, imgs[i].patches));
      loc += rec.acc_loc;
      ++n_loc;
    } else {
      CHECK(rec.acc_loc < 0.0);
    }
  }
  CHECK(r1.n_loc == n_loc);
  if (n_loc > 0) CHECK(r1.acc_loc == doctest::Approx(loc / n_loc).epsilon(1e-14));
  if (r1.correlation_defined) {
    CHECK(r1.srcc == doctest::Approx(static_cast<double>(oracle::spearman(y_hat, y))));
  }
}

TEST_CASE("strict evaluation rejects undefined correlations") {
  const auto imgs = heldout_images(4, 1);
  EvalOptions o;
  o.strict = true;
  CHECK_THROWS_AS(evaluate(PolicyParams{}, imgs, 1, o), Error);
  // A policy that always emits the same score is constant.
  PolicyParams fixed;
  fixed.bias(vocab::score_token(5)) = 50.0;
  CHECK_THROWS_AS(evaluate(fixed, heldout_images(4, 10), 1, o), Error);
  const EvalReport lax = evaluate(fixed, heldout_images(4, 10), 1);
  CHECK_FALSE(lax.correlation_defined);
  CHECK(lax.srcc == 0.0);
}

TEST_CASE("a tool-free policy is unaffected by crop perturbation") {
  PolicyParams p;
  Rng init(5);
  for (double& v : p.flat) v = uniform(init, -0.5, 0.5);
  for (int c = 0; c < kNumCells; ++c) p.bias(vocab::tool_token(c)) = -1e3;
  const auto imgs = heldout_images(6, 30);
  const auto [clean, perturbed] = evidence_perturb_eval(p, imgs, 3);
  REQUIRE(clean.records.size() == perturbed.records.size());
  for (std::size_t i = 0; i < clean.records.size(); ++i) {
    CHECK(clean.records[i].cells.empty());
    CHECK(clean.records[i].y_hat == perturbed.records[i].y_hat);
  }
  CHECK(clean.srcc == perturbed.srcc);
}

TEST_CASE("random-tool baseline uses the same number of distinct cells") {
  Rng init(6);
  PolicyParams p;
  for (double& v : p.flat) v = uniform(init, -0.5, 0.5);
  for (int c = 0; c < kNumCells; ++c) p.bias(vocab::tool_token(c)) += 1.0;
  const auto imgs = heldout_images(8, 60, 1, 4);
  const EvalReport r = evaluate(p, imgs, 2);
  const double base = random_tool_acc_loc(r, imgs, 11);
  CHECK(base >= 0.0);
  CHECK(base <= 1.0);
  CHECK(base == random_tool_acc_loc(r, imgs, 11));
}
