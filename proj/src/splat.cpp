#include "glift/splat.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace glift {

namespace {

// Projected splat with the conic (inverse 2D covariance) and 3-sigma box
// precomputed for per-pixel evaluation.
struct Splat {
  uint32_t index;
  double mx, my;
  double ca, cb, cc;          // conic [ca cb; cb cc]
  double x0, x1, y0, y1;      // 3-sigma bounds
  double opacity;
};

struct PreparedView {
  std::vector<Splat> splats;  // ascending center depth, ties by index
};

PreparedView prepare_view(const GaussianScene& scene, const Camera& cam) {
  struct Entry {
    double depth;
    uint32_t index;
    ProjectedGaussian pg;
  };
  std::vector<Entry> entries;
  entries.reserve(scene.size());
  for (uint32_t i = 0; i < scene.size(); ++i) {
    auto pg = project_gaussian(scene.gaussians[i], cam);
    if (!pg) continue;
    pg->index = i;
    entries.push_back({pg->depth, i, *pg});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.index < b.index;
  });

  PreparedView view;
  view.splats.reserve(entries.size());
  for (const Entry& e : entries) {
    const Eigen::Matrix2d& c = e.pg.cov2d;
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(0, 1);
    Splat s;
    s.index = e.index;
    s.mx = e.pg.mean2d.x();
    s.my = e.pg.mean2d.y();
    s.ca = c(1, 1) / det;
    s.cb = -c(0, 1) / det;
    s.cc = c(0, 0) / det;
    const double rx = kSigmaBound * std::sqrt(c(0, 0));
    const double ry = kSigmaBound * std::sqrt(c(1, 1));
    s.x0 = s.mx - rx;
    s.x1 = s.mx + rx;
    s.y0 = s.my - ry;
    s.y1 = s.my + ry;
    s.opacity = scene.gaussians[e.index].opacity;
    view.splats.push_back(s);
  }
  return view;
}

// The one compositing path: front-to-back over depth-ordered splat
// candidates at a single pixel. view_visibilities and per_pixel_weights both
// go through here, so their weights agree bitwise; pre-filtering candidates
// by row is safe because filtered splats would fail the box test anyway.
template <typename Candidates>
void composite_at(const PreparedView& view, const Candidates& candidates,
                  double px, double py, std::vector<WeightMap::Entry>& out) {
  out.clear();
  double T = 1.0;
  for (const uint32_t pos : candidates) {
    const Splat& s = view.splats[pos];
    if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) continue;
    const double dx = px - s.mx;
    const double dy = py - s.my;
    const double q = s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy;
    if (q > kSigmaBound * kSigmaBound) continue;
    const double a = s.opacity * std::exp(-0.5 * q);
    if (a < kAlphaSkip) continue;
    const double alpha = std::min(a, kAlphaCap);
    const float w = static_cast<float>(alpha * T);
    if (w > 0.0f) out.push_back({s.index, w});
    T *= 1.0 - alpha;
  }
}

struct AllSplats {
  uint32_t count;
  struct Iter {
    uint32_t pos;
    uint32_t operator*() const { return pos; }
    Iter& operator++() {
      ++pos;
      return *this;
    }
    bool operator!=(const Iter& other) const { return pos != other.pos; }
  };
  Iter begin() const { return {0}; }
  Iter end() const { return {count}; }
};

}  // namespace

std::optional<ProjectedGaussian> project_gaussian(const Gaussian& g,
                                                  const Camera& cam) {
  const Eigen::Matrix3d R = cam.rotation().cast<double>();
  const Eigen::Vector3d t = cam.translation().cast<double>();
  const Eigen::Vector3d p = R * g.mean.cast<double>() + t;
  if (p.z() <= kNearPlane) return std::nullopt;

  const double fx = cam.fx, fy = cam.fy;
  const double z = p.z();
  const double u = fx * p.x() / z + cam.cx;
  const double v = fy * p.y() / z + cam.cy;

  const double pad_x = 0.5 * (kFrustumPad - 1.0) * cam.width;
  const double pad_y = 0.5 * (kFrustumPad - 1.0) * cam.height;
  if (u < -pad_x || u > cam.width + pad_x || v < -pad_y ||
      v > cam.height + pad_y)
    return std::nullopt;

  Eigen::Matrix<double, 2, 3> J;
  J << fx / z, 0, -fx * p.x() / (z * z),  //
      0, fy / z, -fy * p.y() / (z * z);
  const Eigen::Matrix<double, 2, 3> M = J * R;
  Eigen::Matrix2d cov2d = M * covariance_of(g) * M.transpose();
  cov2d(0, 0) += kCovDilation;
  cov2d(1, 1) += kCovDilation;
  cov2d(0, 1) = cov2d(1, 0) = 0.5 * (cov2d(0, 1) + cov2d(1, 0));

  ProjectedGaussian pg;
  pg.mean2d = {u, v};
  pg.cov2d = cov2d;
  pg.depth = z;
  return pg;
}

double density_at(const ProjectedGaussian& pg, const Eigen::Vector2d& u) {
  const Eigen::Matrix2d& c = pg.cov2d;
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(0, 1);
  if (!(det > 0))
    throw std::logic_error("singular projected covariance after dilation");
  const double dx = u.x() - pg.mean2d.x();
  const double dy = u.y() - pg.mean2d.y();
  const double q =
      (c(1, 1) * dx * dx - 2.0 * c(0, 1) * dx * dy + c(0, 0) * dy * dy) / det;
  return std::exp(-0.5 * q);
}

double alpha_at(const Gaussian& g, const ProjectedGaussian& pg,
                const Eigen::Vector2d& u) {
  const double a = g.opacity * density_at(pg, u);
  if (a < kAlphaSkip) return 0.0;
  return std::min(a, kAlphaCap);
}

Eigen::Vector2i center_pixel(const Eigen::Vector2d& mean2d) {
  return {static_cast<int>(std::floor(mean2d.x() + 0.5)),
          static_cast<int>(std::floor(mean2d.y() + 0.5))};
}

std::vector<VisibilityRecord> view_visibilities(const GaussianScene& scene,
                                                const Camera& cam,
                                                uint32_t view_index) {
  const PreparedView view = prepare_view(scene, cam);

  // Gaussians whose center lands inside the image, grouped by pixel so each
  // composited pixel is evaluated once.
  struct Request {
    uint32_t splat_pos;
    int px, py;
  };
  std::vector<Request> requests;
  requests.reserve(view.splats.size());
  std::unordered_map<uint64_t, uint32_t> pixel_slot;
  std::vector<std::pair<int, int>> unique_pixels;
  for (uint32_t pos = 0; pos < view.splats.size(); ++pos) {
    const Splat& s = view.splats[pos];
    const Eigen::Vector2i c = center_pixel({s.mx, s.my});
    if (c.x() < 0 || c.y() < 0 || c.x() >= static_cast<int>(cam.width) ||
        c.y() >= static_cast<int>(cam.height))
      continue;
    const uint64_t key =
        (static_cast<uint64_t>(c.y()) << 32) | static_cast<uint32_t>(c.x());
    if (pixel_slot.emplace(key, unique_pixels.size()).second)
      unique_pixels.emplace_back(c.x(), c.y());
    requests.push_back({pos, c.x(), c.y()});
  }

  const AllSplats all{static_cast<uint32_t>(view.splats.size())};
  std::vector<std::vector<WeightMap::Entry>> composited(unique_pixels.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (int64_t k = 0; k < static_cast<int64_t>(unique_pixels.size()); ++k) {
    composite_at(view, all, unique_pixels[k].first, unique_pixels[k].second,
                 composited[k]);
  }

  std::vector<VisibilityRecord> records;
  records.reserve(requests.size());
  for (const Request& req : requests) {
    const uint64_t key = (static_cast<uint64_t>(req.py) << 32) |
                         static_cast<uint32_t>(req.px);
    const auto& entries = composited[pixel_slot.at(key)];
    const uint32_t gi = view.splats[req.splat_pos].index;
    for (const WeightMap::Entry& e : entries) {
      if (e.index != gi) continue;
      VisibilityRecord rec;
      rec.gaussian_index = gi;
      rec.view_index = view_index;
      rec.pixel = {req.px, req.py};
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

WeightMap per_pixel_weights(const GaussianScene& scene, const Camera& cam) {
  const PreparedView view = prepare_view(scene, cam);

  // bin depth-ordered splat positions by the rows their box touches, so a
  // row walks only the splats that can reach it
  std::vector<std::vector<uint32_t>> rows(cam.height);
  for (uint32_t pos = 0; pos < view.splats.size(); ++pos) {
    const Splat& s = view.splats[pos];
    const int64_t y0 = std::max<int64_t>(
        0, static_cast<int64_t>(std::ceil(s.y0)));
    const int64_t y1 = std::min<int64_t>(
        cam.height - 1, static_cast<int64_t>(std::floor(s.y1)));
    for (int64_t y = y0; y <= y1; ++y) rows[y].push_back(pos);
  }

  WeightMap wm;
  wm.height = cam.height;
  wm.width = cam.width;
  wm.pixels.resize(static_cast<size_t>(cam.height) * cam.width);
#pragma omp parallel for schedule(static)
  for (int64_t row = 0; row < static_cast<int64_t>(cam.height); ++row) {
    for (uint32_t col = 0; col < cam.width; ++col) {
      composite_at(view, rows[row], static_cast<double>(col),
                   static_cast<double>(row), wm.pixels[row * cam.width + col]);
    }
  }
  return wm;
}

namespace {
constexpr char kWeightMapMagic[4] = {'V', 'W', 'M', 'P'};
}

void save_weight_map(const WeightMap& wm, const std::filesystem::path& path) {
  detail::Writer w(path);
  w.magic(kWeightMapMagic);
  w.u32(1);
  w.u32(wm.height);
  w.u32(wm.width);
  for (const auto& px : wm.pixels) {
    w.u32(static_cast<uint32_t>(px.size()));
    for (const WeightMap::Entry& e : px) {
      w.u32(e.index);
      w.f32(e.weight);
    }
  }
  w.close();
}

WeightMap load_weight_map(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic(kWeightMapMagic);
  r.expect_version(1);
  WeightMap wm;
  wm.height = r.u32();
  wm.width = r.u32();
  const size_t n = detail::checked_count(
      static_cast<uint64_t>(wm.height) * wm.width, 4, "weight map");
  wm.pixels.resize(n);
  for (auto& px : wm.pixels) {
    const uint32_t count = r.u32();
    px.resize(detail::checked_count(count, 8, "weight map entries"));
    for (auto& e : px) {
      e.index = r.u32();
      e.weight = r.f32();
    }
  }
  r.expect_eof();
  return wm;
}

}  // namespace glift
