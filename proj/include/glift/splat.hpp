#pragma once

#include "glift/types.hpp"

#include <filesystem>
#include <optional>

namespace glift {

// Near plane, frustum padding factor and the low-pass dilation added to the
// projected covariance. Fixed constants so results are reproducible.
constexpr double kNearPlane = 0.01;
constexpr double kFrustumPad = 1.3;
constexpr double kCovDilation = 0.3;
constexpr double kAlphaCap = 0.99;
constexpr double kAlphaSkip = 1.0 / 255.0;
constexpr double kSigmaBound = 3.0;  // per-splat evaluation ellipse

struct ProjectedGaussian {
  uint32_t index = 0;
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
  double depth = 0;
};

// Marginal contribution w = alpha * T of one Gaussian at its center pixel in
// one view.
struct VisibilityRecord {
  uint32_t gaussian_index = 0;
  uint32_t view_index = 0;
  Eigen::Vector2i pixel = Eigen::Vector2i::Zero();
  float weight = 0;
};

struct WeightMap {
  struct Entry {
    uint32_t index;
    float weight;
  };
  uint32_t height = 0, width = 0;
  std::vector<std::vector<Entry>> pixels;  // depth order within each pixel

  std::span<const Entry> at(uint32_t row, uint32_t col) const {
    return pixels[static_cast<size_t>(row) * width + col];
  }
};

// EWA-style perspective projection: cov2d = J W Sigma W^T J^T + dilation.
// Returns nullopt when the center is behind the near plane or projects
// outside the padded image rectangle.
std::optional<ProjectedGaussian> project_gaussian(const Gaussian& g,
                                                  const Camera& cam);

// Projected density rho(u) = exp(-0.5 (u - mu)^T cov2d^{-1} (u - mu)).
double density_at(const ProjectedGaussian& pg, const Eigen::Vector2d& u);

// alpha = min(0.99, opacity * rho), zero below the 1/255 skip threshold.
double alpha_at(const Gaussian& g, const ProjectedGaussian& pg,
                const Eigen::Vector2d& u);

// Depth-sorted front-to-back compositing at every Gaussian's center pixel.
// Records with zero weight are omitted; output sorted by gaussian_index.
std::vector<VisibilityRecord> view_visibilities(const GaussianScene& scene,
                                                const Camera& cam,
                                                uint32_t view_index);

// Full per-pixel weight map; shares the compositing path with
// view_visibilities so center-pixel entries agree exactly.
WeightMap per_pixel_weights(const GaussianScene& scene, const Camera& cam);

// Pixel sample positions sit at integer coordinates; the center pixel of a
// continuous position u is floor(u + 0.5).
Eigen::Vector2i center_pixel(const Eigen::Vector2d& mean2d);

// "VWMP" debug dump.
void save_weight_map(const WeightMap& wm, const std::filesystem::path& path);
WeightMap load_weight_map(const std::filesystem::path& path);

}  // namespace glift
