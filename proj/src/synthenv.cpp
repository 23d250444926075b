// SPDX-License-Identifier: Apache-2.0
#include "iqa/synthenv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "iqa/rng.hpp"

namespace iqa {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

DistortionPatch random_patch(Rng& rng, const GeneratorOptions& o) {
  DistortionPatch p;
  const int w = uniform_int(rng, o.min_side, o.max_side);
  const int h = uniform_int(rng, o.min_side, o.max_side);
  const int x0 = uniform_int(rng, 0, kImageSize - w);
  const int y0 = uniform_int(rng, 0, kImageSize - h);
  p.bbox = {x0, y0, x0 + w, y0 + h};
  p.kind = static_cast<DistortionKind>(uniform_int(rng, 0, 2));
  p.intensity = uniform(rng, o.min_intensity, o.max_intensity);
  p.texture_seed = rng();
  return p;
}

// Per-pixel offset of one patch at intensity 1. Every kind is keyed on
// absolute pixel coordinates.
double unit_offset(const DistortionPatch& p, int x, int y) {
  switch (p.kind) {
    case DistortionKind::kNoise:
      return hash_to_signed_unit(
          hash_combine(p.texture_seed,
                       static_cast<std::uint64_t>(y) * kImageSize + x));
    case DistortionKind::kBlock: {
      // 2x2 blocks with a random sign and magnitude in [0.5, 1].
      const auto block = static_cast<std::uint64_t>(y / 2) * kImageSize + x / 2;
      const double u = hash_to_signed_unit(hash_combine(p.texture_seed, block));
      return (u < 0 ? -1.0 : 1.0) * (0.5 + 0.5 * std::abs(u));
    }
    case DistortionKind::kBlur: {
      // Ringing left by a band-limited blur: a diagonal oscillation with a
      // 4-pixel period and a seeded phase.
      const double phase =
          2.0 * std::numbers::pi *
          (0.5 * (hash_to_signed_unit(mix64(p.texture_seed)) + 1.0));
      return std::cos(0.5 * std::numbers::pi * (x + y) + phase);
    }
  }
  return 0.0;
}

Grid smooth_once(const Grid& g) {
  Grid out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, g.width() - 1);
          const int yy = std::clamp(y + dy, 0, g.height() - 1);
          sum += g.at(xx, yy);
        }
      }
      out.at(x, y) = clamp01((1.0 - kSmoothingWeight) * g.at(x, y) +
                             kSmoothingWeight * sum / 9.0);
    }
  }
  return out;
}

}  // namespace

std::optional<BBox> BBox::intersect(const BBox& o) const {
  BBox r{std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1),
         std::min(y1, o.y1)};
  if (r.x0 >= r.x1 || r.y0 >= r.y1) return std::nullopt;
  return r;
}

const char* to_string(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::kNoise: return "noise";
    case DistortionKind::kBlur: return "blur";
    case DistortionKind::kBlock: return "block";
  }
  return "unknown";
}

Grid base_field(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "base"));
  // Two sinusoids with 0-1 cycles per image along each axis.
  struct Wave {
    int fx, fy;
    double phase;
  };
  Wave waves[2];
  for (auto& w : waves) {
    do {
      w.fx = uniform_int(rng, 0, 1);
      w.fy = uniform_int(rng, 0, 1);
    } while (w.fx == 0 && w.fy == 0);
    w.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  Grid g(kImageSize, kImageSize);
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      double v = 0.5;
      for (const auto& w : waves) {
        v += 0.15 * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) /
                                 kImageSize +
                             w.phase);
      }
      g.at(x, y) = v;
    }
  }
  return g;
}

Grid render(std::uint64_t seed, std::span<const DistortionPatch> patches,
            int smoothing_passes) {
  Grid g = base_field(seed);
  for (const auto& p : patches) {
    if (p.intensity == 0.0) continue;
    for (int y = p.bbox.y0; y < p.bbox.y1; ++y) {
      for (int x = p.bbox.x0; x < p.bbox.x1; ++x) {
        g.at(x, y) += kDistortionAmplitude * p.intensity * unit_offset(p, x, y);
      }
    }
  }
  for (double& v : g.values()) v = clamp01(v);
  for (int i = 0; i < smoothing_passes; ++i) g = smooth_once(g);
  return g;
}

SynthImage generate(std::uint64_t seed, int num_patches,
                    const GeneratorOptions& options) {
  num_patches = std::clamp(num_patches, 0, kMaxPatches);
  SynthImage img;
  img.seed = seed;
  Rng rng(derive_seed(seed, "patches"));
  for (int i = 0; i < num_patches; ++i) {
    img.patches.push_back(random_patch(rng, options));
  }
  img.pixels = render(seed, img.patches, 0);
  return img;
}

double distortion_energy(std::span<const DistortionPatch> patches) {
  double energy = 0.0;
  for (const auto& p : patches) energy += p.intensity * p.bbox.area();
  return energy;
}

double true_score(const SynthImage& img, const ScoreConstants& constants) {
  const double norm = static_cast<double>(kImageSize) * kImageSize *
                      constants.a_norm;
  const double y = 5.0 - constants.c * distortion_energy(img.patches) / norm;
  return std::clamp(y, 1.0, 5.0);
}

std::optional<Grid> crop(const Grid& grid, const BBox& bbox) {
  if (!bbox.valid(grid.width(), grid.height())) return std::nullopt;
  Grid out(bbox.width(), bbox.height());
  for (int y = 0; y < bbox.height(); ++y) {
    for (int x = 0; x < bbox.width(); ++x) {
      out.at(x, y) = grid.at(bbox.x0 + x, bbox.y0 + y);
    }
  }
  return out;
}

std::optional<Grid> crop(const SynthImage& img, const BBox& bbox) {
  return crop(img.pixels, bbox);
}

void paste(Grid& grid, const Grid& tile, const BBox& bbox) {
  for (int y = 0; y < tile.height(); ++y) {
    for (int x = 0; x < tile.width(); ++x) {
      grid.at(bbox.x0 + x, bbox.y0 + y) = tile.at(x, y);
    }
  }
}

SynthImage perturb(const SynthImage& img, std::uint64_t seed,
                   const PerturbOptions& options) {
  Rng rng(derive_seed(seed, "perturb"));
  SynthImage out = img;
  const int n = uniform_int(rng, options.min_patches, options.max_patches);
  GeneratorOptions gen;
  gen.min_intensity = options.min_intensity;
  gen.max_intensity = options.max_intensity;
  for (int i = 0; i < n; ++i) out.patches.push_back(random_patch(rng, gen));
  out.smoothing_passes += options.smoothing_passes;
  out.pixels = render(out.seed, out.patches, out.smoothing_passes);
  return out;
}

Grid laplacian(const Grid& g) {
  Grid out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const double c = g.at(x, y);
      const double l = g.at(std::max(x - 1, 0), y);
      const double r = g.at(std::min(x + 1, g.width() - 1), y);
      const double u = g.at(x, std::max(y - 1, 0));
      const double d = g.at(x, std::min(y + 1, g.height() - 1));
      out.at(x, y) = l + r + u + d - 4.0 * c;
    }
  }
  return out;
}

RegionFeatures region_features(const Grid& grid) {
  const auto v = grid.values();
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  const Grid lap = laplacian(grid);
  double lap_abs = 0.0;
  for (double x : lap.values()) lap_abs += std::abs(x);
  lap_abs /= n;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {mean, var, lap_abs, *hi - *lo};
}

}  // namespace iqa
