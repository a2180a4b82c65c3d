#pragma once

#include "glift/types.hpp"

#include <filesystem>

namespace glift {

struct LabelConfig {
  double tau_radius = 3.0;  // culling radius multiplier on max(scale)
  uint32_t k_fallback = 8;  // nearest-neighbor fallback for sparse regions
  uint32_t chunk_size = 4096;
  bool use_significance = true;  // gamma modulation of the votes

  void validate() const;
};

struct GaussianLabels {
  std::vector<uint32_t> labels;  // kUnlabeled when no votes
  std::vector<float> vote_mass;  // winning class vote sum
  std::vector<float> gamma;      // opacity * sx * sy * sz

  size_t size() const { return labels.size(); }
};

// Candidate-buffer accounting, used to check that peak memory tracks the
// chunk candidate count rather than N*Q.
struct LabelStats {
  size_t peak_candidates_per_gaussian = 0;
  size_t peak_buffer_entries = 0;  // max candidate slots alive at once
  size_t total_candidates = 0;
};

double mahalanobis_sq(const Gaussian& g, const Eigen::Vector3f& p);

// exp(-0.5 d^2); callers modulate by gamma.
double density_vote(const Gaussian& g, const Eigen::Vector3f& p);

double significance(const Gaussian& g);

// Points within tau_radius * max(scale) of the mean, or the k_fallback
// nearest when the radius query comes up short. Backed by a k-d tree over
// the cloud.
class PointIndex {
 public:
  explicit PointIndex(const LabeledPointCloud& cloud);

  void radius_query(const Eigen::Vector3f& center, double radius,
                    std::vector<uint32_t>& out) const;
  void knn_query(const Eigen::Vector3f& center, uint32_t k,
                 std::vector<uint32_t>& out) const;

 private:
  struct Node {
    uint32_t begin, end;  // leaf range into order_
    int axis = -1;        // -1 marks a leaf
    float split = 0;
    uint32_t left = 0, right = 0;
  };
  const LabeledPointCloud& cloud_;
  std::vector<uint32_t> order_;
  std::vector<Node> nodes_;

  uint32_t build(uint32_t begin, uint32_t end);
};

std::vector<uint32_t> candidate_set(const Gaussian& g,
                                    const LabeledPointCloud& cloud,
                                    const PointIndex& index,
                                    const LabelConfig& cfg);

// Mahalanobis density votes, gamma-modulated, argmax over classes with ties
// to the smallest class id. Gaussians are processed in independent chunks.
GaussianLabels assign_labels(const GaussianScene& scene,
                             const LabeledPointCloud& cloud,
                             const LabelConfig& cfg,
                             LabelStats* stats = nullptr);

// "VGLB" files: u32 label (0xFFFFFFFF = unlabeled), f32 vote mass, f32 gamma.
void save_labels(const GaussianLabels& labels,
                 const std::filesystem::path& path);
GaussianLabels load_labels(const std::filesystem::path& path);

}  // namespace glift
