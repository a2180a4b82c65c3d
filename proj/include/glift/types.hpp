#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glift {

// Error taxonomy mirrored by the CLI exit codes: config 2, format 3,
// validation 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Anisotropic 3D Gaussian. `scale` holds per-axis standard deviations, the
// quaternion is (w,x,y,z) and must be unit, opacity lies in (0,1].
struct Gaussian {
  Eigen::Vector3f mean = Eigen::Vector3f::Zero();
  Eigen::Vector3f scale = Eigen::Vector3f::Ones();
  Eigen::Quaternionf rotation = Eigen::Quaternionf::Identity();
  float opacity = 1.0f;
};

struct GaussianScene {
  std::vector<Gaussian> gaussians;

  size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

// Pinhole camera. `world_to_camera` is a rigid transform; its rotation block
// must be orthonormal. Camera space: x right, y down the image rows,
// z forward (depth).
struct Camera {
  float fx = 0, fy = 0, cx = 0, cy = 0;
  uint32_t width = 0, height = 0;
  Eigen::Matrix4f world_to_camera = Eigen::Matrix4f::Identity();

  Eigen::Matrix3f rotation() const {
    return world_to_camera.topLeftCorner<3, 3>();
  }
  Eigen::Vector3f translation() const {
    return world_to_camera.topRightCorner<3, 1>();
  }
};

// Dense per-pixel feature image, row-major (row, column, channel). A zero
// vector marks a pixel with no valid feature; all other pixels are unit.
struct FeatureMap {
  uint32_t height = 0, width = 0, dim = 0;
  std::vector<float> data;

  const float* pixel(uint32_t row, uint32_t col) const {
    return data.data() + (static_cast<size_t>(row) * width + col) * dim;
  }
  float* pixel(uint32_t row, uint32_t col) {
    return data.data() + (static_cast<size_t>(row) * width + col) * dim;
  }
  bool pixel_is_zero(uint32_t row, uint32_t col) const {
    const float* p = pixel(row, col);
    for (uint32_t c = 0; c < dim; ++c)
      if (p[c] != 0.0f) return false;
    return true;
  }
};

// Per-Gaussian aggregated feature field. Invariant: weights[i] == 0 iff
// feature row i is all zeros; otherwise the row is unit within 1e-5.
struct GaussianFeatureField {
  uint32_t dim = 0;
  std::vector<float> features;  // count x dim, row-major
  std::vector<float> weights;   // cumulative visibility weight per Gaussian

  size_t count() const { return weights.size(); }
  const float* feature(size_t i) const { return features.data() + i * dim; }
  float* feature(size_t i) { return features.data() + i * dim; }
  Eigen::Map<const Eigen::VectorXf> feature_vec(size_t i) const {
    return {feature(i), dim};
  }
};

constexpr uint32_t kUnlabeled = 0xFFFFFFFFu;

struct LabeledPointCloud {
  std::vector<Eigen::Vector3f> points;
  std::vector<uint32_t> labels;

  size_t size() const { return points.size(); }
};

// Validation helpers; throw ValidationError naming the offending element.
void validate(const Gaussian& g, size_t index);
void validate(const GaussianScene& scene);
void validate(const Camera& cam, size_t index);
void validate(const FeatureMap& map);
void validate(const GaussianFeatureField& field);
void validate(const LabeledPointCloud& cloud);

// Sigma = R diag(scale^2) R^T. Symmetric positive definite by construction.
Eigen::Matrix3d covariance_of(const Gaussian& g);

}  // namespace glift
