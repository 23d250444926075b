// SPDX-License-Identifier: Apache-2.0
//
// Procedural image-quality environment: 32x32 scalar images with localized
// distortion patches, a closed-form ground-truth score, the crop tool and the
// perturbation operator.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace iqa {

inline constexpr int kImageSize = 32;
inline constexpr int kMaxPatches = 4;

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool valid(int width = kImageSize, int height = kImageSize) const {
    return 0 <= x0 && x0 < x1 && x1 <= width && 0 <= y0 && y0 < y1 &&
           y1 <= height;
  }
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  int area() const { return width() * height(); }
  bool contains(int x, int y) const {
    return x0 <= x && x < x1 && y0 <= y && y < y1;
  }
  std::optional<BBox> intersect(const BBox& o) const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Row-major grid of intensities.
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

enum class DistortionKind { kNoise = 0, kBlur = 1, kBlock = 2 };

const char* to_string(DistortionKind kind);

/// A localized distortion. `texture_seed` keys the per-pixel pattern by
/// absolute pixel coordinates, so a patch cut into pieces renders exactly
/// like the original.
struct DistortionPatch {
  BBox bbox;
  DistortionKind kind = DistortionKind::kNoise;
  double intensity = 0.0;
  std::uint64_t texture_seed = 0;

  friend bool operator==(const DistortionPatch&,
                         const DistortionPatch&) = default;
};

struct SynthImage {
  Grid pixels;
  std::vector<DistortionPatch> patches;
  std::uint64_t seed = 0;
  /// Number of global 3x3 smoothing passes applied after patch rendering
  /// (introduced by `perturb`).
  int smoothing_passes = 0;
};

/// Constants of the ground-truth score
///   y = clamp(5 - c * sum(intensity * area) / (H * W * a_norm), 1, 5).
struct ScoreConstants {
  double c = 8.0;
  double a_norm = 0.25;
};

struct GeneratorOptions {
  int min_side = 4;
  int max_side = 10;
  double min_intensity = 0.2;
  double max_intensity = 1.0;
};

/// Peak per-pixel offset of a patch at intensity 1.
inline constexpr double kDistortionAmplitude = 0.35;
/// Blend weight of one global smoothing pass toward the 3x3 mean.
inline constexpr double kSmoothingWeight = 0.25;

struct PerturbOptions {
  double min_intensity = 0.3;
  double max_intensity = 0.7;
  int min_patches = 1;
  int max_patches = 3;
  int smoothing_passes = 1;
};

/// Deterministic image with `num_patches` (clamped to [0, 4]) distortions
/// over a two-sinusoid background.
SynthImage generate(std::uint64_t seed, int num_patches,
                    const GeneratorOptions& options = {});

/// Smooth background field of an image seed, before any distortion.
Grid base_field(std::uint64_t seed);

/// Re-renders pixels from seed, patches and smoothing passes.
Grid render(std::uint64_t seed, std::span<const DistortionPatch> patches,
            int smoothing_passes);

double distortion_energy(std::span<const DistortionPatch> patches);
double true_score(const SynthImage& img, const ScoreConstants& constants = {});

/// Exact sub-grid; nullopt when `bbox` is not a valid box inside the grid
/// (a rejected tool call).
std::optional<Grid> crop(const Grid& grid, const BBox& bbox);
std::optional<Grid> crop(const SynthImage& img, const BBox& bbox);

/// Writes `tile` into `grid` at the top-left corner of `bbox`.
void paste(Grid& grid, const Grid& tile, const BBox& bbox);

/// Adds fresh random patches and a mild global smoothing.
SynthImage perturb(const SynthImage& img, std::uint64_t seed,
                   const PerturbOptions& options = {});

/// [mean, variance, mean |discrete Laplacian|, max - min].
using RegionFeatures = std::array<double, 4>;
RegionFeatures region_features(const Grid& grid);

/// 4-neighbour Laplacian with edge replication.
Grid laplacian(const Grid& grid);

}  // namespace iqa
