// SPDX-License-Identifier: Apache-2.0
#include "iqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "iqa/error.hpp"
#include "iqa/rng.hpp"
#include "iqa/trajectory.hpp"

namespace iqa {

double plcc(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::kUndefinedCorrelation,
                "correlation needs two equal-length vectors of length >= 2");
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::kUndefinedCorrelation,
                "correlation undefined for a constant vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double srcc(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::kUndefinedCorrelation,
                "correlation needs two equal-length vectors of length >= 2");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return plcc(rx, ry);
}

double acc_loc(std::span<const BBox> crops,
               std::span<const DistortionPatch> gt) {
  int gt_pixels = 0;
  int covered = 0;
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      const bool in_gt = std::any_of(gt.begin(), gt.end(), [&](const auto& p) {
        return p.intensity > 0.0 && p.bbox.contains(x, y);
      });
      if (!in_gt) continue;
      ++gt_pixels;
      if (std::any_of(crops.begin(), crops.end(),
                      [&](const BBox& b) { return b.contains(x, y); })) {
        ++covered;
      }
    }
  }
  if (gt_pixels == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "acc_loc needs at least one ground-truth patch");
  }
  if (crops.empty()) return 0.0;
  return static_cast<double>(covered) / gt_pixels;
}

std::vector<SynthImage> heldout_images(std::uint64_t seed, int n,
                                       int min_patches, int max_patches) {
  std::vector<SynthImage> images;
  images.reserve(static_cast<std::size_t>(std::max(n, 0)));
  Rng count_rng(derive_seed(seed, "eval-counts"));
  for (int i = 0; i < n; ++i) {
    const int patches = uniform_int(count_rng, min_patches, max_patches);
    images.push_back(generate(derive_seed(seed, "eval-image", i), patches));
  }
  return images;
}

namespace {

bool has_gt(const SynthImage& img) {
  return std::any_of(img.patches.begin(), img.patches.end(),
                     [](const auto& p) { return p.intensity > 0.0; });
}

std::vector<BBox> cell_boxes(const std::vector<int>& cells) {
  std::vector<BBox> boxes;
  for (int c : cells) boxes.push_back(cell_bbox(c));
  return boxes;
}

void finalize(EvalReport& report, bool strict) {
  std::vector<double> y, y_hat;
  double loc_sum = 0.0;
  for (const auto& r : report.records) {
    y.push_back(r.y);
    y_hat.push_back(r.y_hat);
    if (r.acc_loc >= 0.0) {
      loc_sum += r.acc_loc;
      ++report.n_loc;
    }
    if (!r.scored) ++report.n_malformed;
  }
  report.n = static_cast<int>(report.records.size());
  report.acc_loc = report.n_loc > 0 ? loc_sum / report.n_loc : 0.0;
  try {
    report.plcc = plcc(y_hat, y);
    report.srcc = srcc(y_hat, y);
  } catch (const Error& e) {
    if (strict) throw;
    report.plcc = 0.0;
    report.srcc = 0.0;
    report.correlation_defined = false;
  }
}

}  // namespace

EvalReport evaluate(const PolicyParams& params,
                    std::span<const SynthImage> images, std::uint64_t seed,
                    const EvalOptions& options) {
  if (options.strict && images.size() < 2) {
    throw Error(ErrorCode::kUndefinedCorrelation,
                "evaluation needs at least two images");
  }
  EvalReport report;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto img = std::make_shared<const SynthImage>(images[i]);
    RolloutOptions ro;
    ro.max_len = options.max_len;
    ro.decoding = Decoding::kGreedy;
    SynthImage perturbed;
    if (options.perturb_crops) {
      perturbed = perturb(*img, derive_seed(seed, "eval-perturb", i),
                          options.perturb);
      ro.observation_source = &perturbed.pixels;
    }
    Rng tie_rng(derive_seed(seed, "eval-greedy", i));
    const Trajectory traj = rollout(params, img, tie_rng, ro);
    ImageRecord rec;
    rec.image_seed = img->seed;
    rec.y = true_score(*img);
    rec.scored = traj.predicted_score.has_value();
    rec.y_hat = traj.predicted_score.value_or(kMissingPrediction);
    rec.cells = traj.visited_cells();
    if (!rec.cells.empty() && has_gt(*img)) {
      const auto boxes = cell_boxes(rec.cells);
      rec.acc_loc = acc_loc(boxes, img->patches);
    }
    report.records.push_back(std::move(rec));
  }
  finalize(report, options.strict);
  return report;
}

std::pair<EvalReport, EvalReport> evidence_perturb_eval(
    const PolicyParams& params, std::span<const SynthImage> images,
    std::uint64_t seed, const EvalOptions& options) {
  EvalOptions clean = options;
  clean.perturb_crops = false;
  EvalOptions dirty = options;
  dirty.perturb_crops = true;
  return {evaluate(params, images, seed, clean),
          evaluate(params, images, seed, dirty)};
}

double random_tool_acc_loc(const EvalReport& report,
                           std::span<const SynthImage> images,
                           std::uint64_t seed) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < report.records.size() && i < images.size();
       ++i) {
    const auto& rec = report.records[i];
    if (rec.acc_loc < 0.0) continue;
    std::vector<int> distinct = rec.cells;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    Rng rng(derive_seed(seed, "random-tool", i));
    std::vector<int> cells(kNumCells);
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(distinct.size());
    sum += acc_loc(cell_boxes(cells), images[i].patches);
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace iqa
