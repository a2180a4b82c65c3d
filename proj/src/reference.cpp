#include "glift/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace glift::reference {

namespace {

// Mirrors the kernel's arithmetic (conic by adjugate-over-determinant,
// 3-sigma box as absolute bounds) so the comparison can be exact.
struct Projected {
  uint32_t index;
  double mx, my;
  double ca, cb, cc;
  double x0, x1, y0, y1;
  double depth;
  double opacity;
};

std::vector<Projected> project_all(const GaussianScene& scene,
                                   const Camera& cam) {
  std::vector<Projected> out;
  for (uint32_t i = 0; i < scene.size(); ++i) {
    const auto pg = project_gaussian(scene.gaussians[i], cam);
    if (!pg) continue;
    const Eigen::Matrix2d& c = pg->cov2d;
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(0, 1);
    Projected p;
    p.index = i;
    p.mx = pg->mean2d.x();
    p.my = pg->mean2d.y();
    p.ca = c(1, 1) / det;
    p.cb = -c(0, 1) / det;
    p.cc = c(0, 0) / det;
    const double rx = kSigmaBound * std::sqrt(c(0, 0));
    const double ry = kSigmaBound * std::sqrt(c(1, 1));
    p.x0 = p.mx - rx;
    p.x1 = p.mx + rx;
    p.y0 = p.my - ry;
    p.y1 = p.my + ry;
    p.depth = pg->depth;
    p.opacity = scene.gaussians[i].opacity;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const Projected& a, const Projected& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.index < b.index;
  });
  return out;
}

std::vector<WeightMap::Entry> composite_pixel(
    const std::vector<Projected>& splats, double px, double py) {
  std::vector<WeightMap::Entry> entries;
  double T = 1.0;
  for (const Projected& s : splats) {
    if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) continue;
    const double dx = px - s.mx;
    const double dy = py - s.my;
    const double q = s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy;
    if (q > kSigmaBound * kSigmaBound) continue;
    const double a = s.opacity * std::exp(-0.5 * q);
    if (a < kAlphaSkip) continue;
    const double alpha = std::min(a, kAlphaCap);
    const float w = static_cast<float>(alpha * T);
    if (w > 0.0f) entries.push_back({s.index, w});
    T *= 1.0 - alpha;
  }
  return entries;
}

}  // namespace

WeightMap per_pixel_weights(const GaussianScene& scene, const Camera& cam) {
  const auto splats = project_all(scene, cam);
  WeightMap wm;
  wm.height = cam.height;
  wm.width = cam.width;
  wm.pixels.resize(static_cast<size_t>(cam.height) * cam.width);
  for (uint32_t row = 0; row < cam.height; ++row)
    for (uint32_t col = 0; col < cam.width; ++col)
      wm.pixels[static_cast<size_t>(row) * cam.width + col] =
          composite_pixel(splats, col, row);
  return wm;
}

std::vector<VisibilityRecord> view_visibilities(const GaussianScene& scene,
                                                const Camera& cam,
                                                uint32_t view_index) {
  const auto splats = project_all(scene, cam);
  std::vector<VisibilityRecord> records;
  for (const Projected& s : splats) {
    const Eigen::Vector2i c = center_pixel({s.mx, s.my});
    if (c.x() < 0 || c.y() < 0 || c.x() >= static_cast<int>(cam.width) ||
        c.y() >= static_cast<int>(cam.height))
      continue;
    const auto entries = composite_pixel(splats, c.x(), c.y());
    for (const WeightMap::Entry& e : entries) {
      if (e.index != s.index) continue;
      VisibilityRecord rec;
      rec.gaussian_index = s.index;
      rec.view_index = view_index;
      rec.pixel = c;
      rec.weight = e.weight;
      records.push_back(rec);
      break;
    }
  }
  std::sort(records.begin(), records.end(),
            [](const VisibilityRecord& a, const VisibilityRecord& b) {
              return a.gaussian_index < b.gaussian_index;
            });
  return records;
}

GaussianLabels assign_labels(const GaussianScene& scene,
                             const LabeledPointCloud& cloud,
                             bool use_significance) {
  GaussianLabels out;
  out.labels.assign(scene.size(), kUnlabeled);
  out.vote_mass.assign(scene.size(), 0.0f);
  out.gamma.assign(scene.size(), 0.0f);
  for (size_t i = 0; i < scene.size(); ++i)
    out.gamma[i] = static_cast<float>(significance(scene.gaussians[i]));
  if (cloud.points.empty()) return out;

  uint32_t max_label = 0;
  for (uint32_t l : cloud.labels) max_label = std::max(max_label, l);
  std::vector<double> votes(static_cast<size_t>(max_label) + 1);

  for (size_t i = 0; i < scene.size(); ++i) {
    const Gaussian& g = scene.gaussians[i];
    const double gamma = use_significance ? significance(g) : 1.0;
    std::fill(votes.begin(), votes.end(), 0.0);
    for (size_t k = 0; k < cloud.size(); ++k)
      votes[cloud.labels[k]] += gamma * density_vote(g, cloud.points[k]);
    uint32_t best = 0;
    for (uint32_t c = 1; c < votes.size(); ++c)
      if (votes[c] > votes[best]) best = c;
    out.labels[i] = best;
    out.vote_mass[i] = static_cast<float>(votes[best]);
  }
  return out;
}

std::vector<uint32_t> candidate_radius(const Gaussian& g,
                                       const LabeledPointCloud& cloud,
                                       double tau_radius) {
  const double r2 = tau_radius * g.scale.maxCoeff() *
                    tau_radius * g.scale.maxCoeff();
  std::vector<uint32_t> out;
  for (uint32_t k = 0; k < cloud.size(); ++k)
    if ((cloud.points[k] - g.mean).squaredNorm() <= r2) out.push_back(k);
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  BinaryMask out = mask;
  const int h = static_cast<int>(mask.height), w = static_cast<int>(mask.width);
  const int r2 = radius * radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      uint8_t v = 0;
      for (int dy = -radius; dy <= radius && !v; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > r2) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          if (mask.at(yy, xx)) {
            v = 1;
            break;
          }
        }
      }
      out.at(y, x) = v;
    }
  }
  return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  BinaryMask out = mask;
  const int h = static_cast<int>(mask.height), w = static_cast<int>(mask.width);
  const int r2 = radius * radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      uint8_t v = 1;
      for (int dy = -radius; dy <= radius && v; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > r2) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w || !mask.at(yy, xx)) {
            v = 0;
            break;
          }
        }
      }
      out.at(y, x) = v;
    }
  }
  return out;
}

}  // namespace glift::reference
