#include "glift/labeling.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace glift {

void LabelConfig::validate() const {
  if (!(tau_radius > 0)) throw ConfigError("tau_radius must be positive");
  if (k_fallback < 1) throw ConfigError("k_fallback must be at least 1");
  if (chunk_size < 1) throw ConfigError("chunk_size must be at least 1");
}

double mahalanobis_sq(const Gaussian& g, const Eigen::Vector3f& p) {
  const Eigen::Vector3d d = (p - g.mean).cast<double>();
  const Eigen::Vector3d sol = covariance_of(g).llt().solve(d);
  return d.dot(sol);
}

double density_vote(const Gaussian& g, const Eigen::Vector3f& p) {
  return std::exp(-0.5 * mahalanobis_sq(g, p));
}

double significance(const Gaussian& g) {
  return static_cast<double>(g.opacity) * g.scale.x() * g.scale.y() *
         g.scale.z();
}

// ---------------------------------------------------------------------------
// k-d tree

namespace {
constexpr uint32_t kLeafSize = 16;
}

PointIndex::PointIndex(const LabeledPointCloud& cloud) : cloud_(cloud) {
  order_.resize(cloud.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!cloud.points.empty()) {
    nodes_.reserve(2 * cloud.size() / kLeafSize + 2);
    build(0, static_cast<uint32_t>(cloud.size()));
  }
}

uint32_t PointIndex::build(uint32_t begin, uint32_t end) {
  const uint32_t id = static_cast<uint32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0, 0, 0});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3f lo = cloud_.points[order_[begin]];
  Eigen::Vector3f hi = lo;
  for (uint32_t k = begin + 1; k < end; ++k) {
    lo = lo.cwiseMin(cloud_.points[order_[k]]);
    hi = hi.cwiseMax(cloud_.points[order_[k]]);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide, stay a leaf

  const uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](uint32_t a, uint32_t b) {
                     return cloud_.points[a][axis] < cloud_.points[b][axis];
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = cloud_.points[order_[mid]][axis];
  const uint32_t left = build(begin, mid);
  const uint32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void PointIndex::radius_query(const Eigen::Vector3f& center, double radius,
                              std::vector<uint32_t>& out) const {
  out.clear();
  if (nodes_.empty()) return;
  const double r2 = radius * radius;
  std::vector<uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.axis < 0) {
      for (uint32_t k = node.begin; k < node.end; ++k) {
        const uint32_t pi = order_[k];
        if ((cloud_.points[pi] - center).squaredNorm() <= r2)
          out.push_back(pi);
      }
      continue;
    }
    const double delta = center[node.axis] - node.split;
    // children overlap at the split plane, so recurse when within radius
    if (delta <= radius) stack.push_back(node.left);
    if (delta >= -radius) stack.push_back(node.right);
  }
  std::sort(out.begin(), out.end());
}

void PointIndex::knn_query(const Eigen::Vector3f& center, uint32_t k,
                           std::vector<uint32_t>& out) const {
  out.clear();
  if (nodes_.empty() || k == 0) return;
  using Cand = std::pair<double, uint32_t>;  // (squared distance, point)
  std::priority_queue<Cand> best;            // max-heap on distance

  // depth-first with near child first; prune against the current k-th best
  struct Visit {
    uint32_t node;
    double plane_dist2;
  };
  std::vector<Visit> stack{{0, 0.0}};
  while (!stack.empty()) {
    const Visit visit = stack.back();
    stack.pop_back();
    if (best.size() == k && visit.plane_dist2 > best.top().first) continue;
    const Node& node = nodes_[visit.node];
    if (node.axis < 0) {
      for (uint32_t i = node.begin; i < node.end; ++i) {
        const uint32_t pi = order_[i];
        const double d2 = (cloud_.points[pi] - center).squaredNorm();
        if (best.size() < k) {
          best.emplace(d2, pi);
        } else if (d2 < best.top().first ||
                   (d2 == best.top().first && pi < best.top().second)) {
          best.pop();
          best.emplace(d2, pi);
        }
      }
      continue;
    }
    const double delta = center[node.axis] - node.split;
    const uint32_t near = delta < 0 ? node.left : node.right;
    const uint32_t far = delta < 0 ? node.right : node.left;
    stack.push_back({far, delta * delta});
    stack.push_back({near, 0.0});
  }
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top().second);
    best.pop();
  }
  std::sort(out.begin(), out.end());
}

std::vector<uint32_t> candidate_set(const Gaussian& g,
                                    const LabeledPointCloud& cloud,
                                    const PointIndex& index,
                                    const LabelConfig& cfg) {
  std::vector<uint32_t> out;
  // The ellipsoid {d^2_Mahalanobis <= tau^2} is contained in the Euclidean
  // ball of radius tau * max(scale), so the radius filter is a true superset.
  const double radius = cfg.tau_radius * g.scale.maxCoeff();
  index.radius_query(g.mean, radius, out);
  if (out.size() < cfg.k_fallback) {
    index.knn_query(g.mean, std::min<uint32_t>(cfg.k_fallback,
                                               static_cast<uint32_t>(
                                                   cloud.size())),
                    out);
  }
  return out;
}

GaussianLabels assign_labels(const GaussianScene& scene,
                             const LabeledPointCloud& cloud,
                             const LabelConfig& cfg, LabelStats* stats) {
  cfg.validate();
  const size_t n = scene.size();
  GaussianLabels out;
  out.labels.assign(n, kUnlabeled);
  out.vote_mass.assign(n, 0.0f);
  out.gamma.assign(n, 0.0f);
  for (size_t i = 0; i < n; ++i)
    out.gamma[i] = static_cast<float>(significance(scene.gaussians[i]));
  if (cloud.points.empty()) return out;

  const PointIndex index(cloud);
  uint32_t max_label = 0;
  for (uint32_t l : cloud.labels) max_label = std::max(max_label, l);
  if (max_label >= (1u << 24))
    throw ValidationError("assign_labels: implausible class id " +
                          std::to_string(max_label));
  const size_t class_count = static_cast<size_t>(max_label) + 1;

  const size_t chunk = cfg.chunk_size;
  const size_t num_chunks = (n + chunk - 1) / chunk;

  size_t peak_candidates = 0, peak_buffer = 0, total_candidates = 0;

#pragma omp parallel
  {
    // per-thread scratch: one candidate buffer plus one vote row, reused
    std::vector<uint32_t> candidates;
    std::vector<double> votes(class_count, 0.0);
    size_t local_peak = 0, local_buffer = 0, local_total = 0;

#pragma omp for schedule(dynamic)
    for (int64_t c = 0; c < static_cast<int64_t>(num_chunks); ++c) {
      const size_t begin = static_cast<size_t>(c) * chunk;
      const size_t end = std::min(begin + chunk, n);
      for (size_t i = begin; i < end; ++i) {
        const Gaussian& g = scene.gaussians[i];
        candidates = candidate_set(g, cloud, index, cfg);
        local_peak = std::max(local_peak, candidates.size());
        local_buffer = std::max(local_buffer, candidates.capacity());
        local_total += candidates.size();
        if (candidates.empty()) continue;

        std::fill(votes.begin(), votes.end(), 0.0);
        const double gamma = cfg.use_significance ? significance(g) : 1.0;
        for (uint32_t pi : candidates)
          votes[cloud.labels[pi]] += gamma * density_vote(g, cloud.points[pi]);

        uint32_t best = 0;
        for (uint32_t cls = 1; cls < class_count; ++cls)
          if (votes[cls] > votes[best]) best = cls;  // ties keep smaller id
        out.labels[i] = best;
        out.vote_mass[i] = static_cast<float>(votes[best]);
      }
    }

#pragma omp critical
    {
      peak_candidates = std::max(peak_candidates, local_peak);
      peak_buffer += local_buffer;  // buffers alive simultaneously
      total_candidates += local_total;
    }
  }

  if (stats) {
    stats->peak_candidates_per_gaussian = peak_candidates;
    stats->peak_buffer_entries = peak_buffer;
    stats->total_candidates = total_candidates;
  }
  return out;
}

namespace {
constexpr char kLabelsMagic[4] = {'V', 'G', 'L', 'B'};
}

void save_labels(const GaussianLabels& labels,
                 const std::filesystem::path& path) {
  detail::Writer w(path);
  w.magic(kLabelsMagic);
  w.u32(1);
  w.u64(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    w.u32(labels.labels[i]);
    w.f32(labels.vote_mass[i]);
    w.f32(labels.gamma[i]);
  }
  w.close();
}

GaussianLabels load_labels(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic(kLabelsMagic);
  r.expect_version(1);
  const size_t n = detail::checked_count(r.u64(), 12, "labels");
  GaussianLabels out;
  out.labels.resize(n);
  out.vote_mass.resize(n);
  out.gamma.resize(n);
  for (size_t i = 0; i < n; ++i) {
    out.labels[i] = r.u32();
    out.vote_mass[i] = r.f32();
    out.gamma[i] = r.f32();
  }
  r.expect_eof();
  return out;
}

}  // namespace glift
