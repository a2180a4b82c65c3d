#include "glift/types.hpp"

#include <cmath>
#include <sstream>

namespace glift {

namespace {

[[noreturn]] void fail(const std::string& what) { throw ValidationError(what); }

bool finite(const Eigen::Vector3f& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace

void validate(const Gaussian& g, size_t index) {
  std::ostringstream at;
  at << "gaussian " << index << ": ";
  if (!finite(g.mean)) fail(at.str() + "non-finite mean");
  if (!finite(g.scale) || g.scale.minCoeff() <= 0.0f)
    fail(at.str() + "scale components must be positive");
  const float qn = g.rotation.norm();
  if (!std::isfinite(qn) || std::abs(qn - 1.0f) > 1e-6f)
    fail(at.str() + "quaternion not unit");
  if (!std::isfinite(g.opacity) || g.opacity <= 0.0f || g.opacity > 1.0f)
    fail(at.str() + "opacity must lie in (0,1]");
}

void validate(const GaussianScene& scene) {
  for (size_t i = 0; i < scene.size(); ++i) validate(scene.gaussians[i], i);
}

void validate(const Camera& cam, size_t index) {
  std::ostringstream at;
  at << "camera " << index << ": ";
  if (!(cam.fx > 0) || !(cam.fy > 0)) fail(at.str() + "focal must be positive");
  if (cam.width < 1 || cam.height < 1) fail(at.str() + "empty image");
  const Eigen::Matrix3f R = cam.rotation();
  if ((R * R.transpose() - Eigen::Matrix3f::Identity()).cwiseAbs().maxCoeff() >
      1e-5f)
    fail(at.str() + "rotation block not orthonormal");
  const Eigen::RowVector4f bottom = cam.world_to_camera.row(3);
  if ((bottom - Eigen::RowVector4f(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-6f)
    fail(at.str() + "bottom row must be (0,0,0,1)");
}

void validate(const FeatureMap& map) {
  const size_t expect =
      static_cast<size_t>(map.height) * map.width * map.dim;
  if (map.data.size() != expect)
    throw FormatError("feature map payload does not match header dimensions");
  for (size_t px = 0; px < static_cast<size_t>(map.height) * map.width; ++px) {
    const float* p = map.data.data() + px * map.dim;
    double n2 = 0;
    bool zero = true;
    for (uint32_t c = 0; c < map.dim; ++c) {
      if (!std::isfinite(p[c])) fail("feature map: non-finite value");
      if (p[c] != 0.0f) zero = false;
      n2 += static_cast<double>(p[c]) * p[c];
    }
    if (!zero && std::abs(std::sqrt(n2) - 1.0) > 1e-4) {
      std::ostringstream err;
      err << "feature map: pixel " << px << " has norm " << std::sqrt(n2);
      fail(err.str());
    }
  }
}

void validate(const GaussianFeatureField& field) {
  if (field.features.size() !=
      static_cast<size_t>(field.dim) * field.weights.size())
    throw FormatError("field payload does not match header dimensions");
  for (size_t i = 0; i < field.count(); ++i) {
    const float* z = field.feature(i);
    double n2 = 0;
    bool zero = true;
    for (uint32_t c = 0; c < field.dim; ++c) {
      if (z[c] != 0.0f) zero = false;
      n2 += static_cast<double>(z[c]) * z[c];
    }
    const float w = field.weights[i];
    if (!std::isfinite(w) || w < 0) fail("field: negative cumulative weight");
    if ((w == 0.0f) != zero) {
      std::ostringstream err;
      err << "field: gaussian " << i << " violates W = 0 <=> z = 0";
      fail(err.str());
    }
    if (!zero && std::abs(std::sqrt(n2) - 1.0) > 1e-5) {
      std::ostringstream err;
      err << "field: gaussian " << i << " feature not unit";
      fail(err.str());
    }
  }
}

void validate(const LabeledPointCloud& cloud) {
  if (cloud.points.size() != cloud.labels.size())
    fail("point cloud: points and labels differ in length");
}

Eigen::Matrix3d covariance_of(const Gaussian& g) {
  const Eigen::Matrix3d R =
      g.rotation.normalized().toRotationMatrix().cast<double>();
  const Eigen::Vector3d s2 = g.scale.cast<double>().array().square();
  Eigen::Matrix3d sigma = R * s2.asDiagonal() * R.transpose();
  // enforce exact symmetry against rounding
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return sigma;
}

}  // namespace glift
