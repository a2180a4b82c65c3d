#pragma once

#include "glift/splat.hpp"
#include "glift/types.hpp"

#include <filesystem>
#include <map>
#include <optional>

namespace glift {

struct BinaryMask {
  uint32_t height = 0, width = 0;
  std::vector<uint8_t> bits;  // row-major, {0,1}

  uint8_t at(uint32_t row, uint32_t col) const {
    return bits[static_cast<size_t>(row) * width + col];
  }
  uint8_t& at(uint32_t row, uint32_t col) {
    return bits[static_cast<size_t>(row) * width + col];
  }
  size_t area() const;
};

struct QuerySet {
  struct Entry {
    std::string name;
    Eigen::VectorXf vec;  // normalized on load
  };
  uint32_t dim = 0;
  std::vector<Entry> queries;
  std::vector<Entry> negatives;
};

QuerySet load_queries(const std::filesystem::path& path);

// Relevancy per Gaussian in [0,1]. With negatives: min over negatives of
// exp(z.q) / (exp(z.q) + exp(z.n)); without: (cos + 1) / 2. Gaussians with
// W = 0 score 0.
std::vector<float> relevancy(const GaussianFeatureField& field,
                             Eigen::Ref<const Eigen::VectorXf> query,
                             std::span<const QuerySet::Entry> negatives = {});

std::vector<uint32_t> select_3d(const GaussianFeatureField& field,
                                Eigen::Ref<const Eigen::VectorXf> query,
                                std::span<const QuerySet::Entry> negatives = {},
                                double threshold = 0.6);

// Composites the selected Gaussians only and thresholds the accumulated
// weight (default 0.5 opacity majority).
BinaryMask render_selection(const GaussianScene& scene, const Camera& cam,
                            std::span<const uint32_t> selected,
                            double threshold = 0.5);

// Per-pixel weighted sum of field features; pixels whose accumulated weight
// stays below 1e-6 are zero. Non-zero pixels are renormalized to unit.
FeatureMap render_feature_image(const GaussianScene& scene, const Camera& cam,
                                const GaussianFeatureField& field);

struct SegMetrics {
  double miou = 0, macc = 0;
  std::map<uint32_t, double> per_class_iou;
  std::map<uint32_t, double> per_class_acc;
};

// Labels in [0, class_count) are scored when present in gt; any other value
// (e.g. kUnlabeled) acts as background. IoU = TP/(TP+FP+FN),
// Acc = TP/(TP+FN), means over scored classes.
SegMetrics miou_macc(std::span<const uint32_t> pred,
                     std::span<const uint32_t> gt, uint32_t class_count);

// (iou, acc) of a predicted binary mask against ground truth.
std::pair<double, double> mask_iou_acc(const BinaryMask& pred,
                                       const BinaryMask& gt);

// Exact binary morphology with the disk B_r = {dx^2 + dy^2 <= r^2};
// out-of-bounds pixels count as background. Distance-transform based.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

// Per-mask corruption: a fair sign drawn from the counter stream keyed by
// (seed, mask_index) picks erosion or dilation; erosions leaving fewer than
// tau_min pixels fall back to dilation.
BinaryMask corrupt_mask(const BinaryMask& mask, int radius, uint64_t seed,
                        uint64_t mask_index, uint32_t tau_min = 64);

// Which operation corrupt_mask applied (exposed for the protocol tests).
enum class CorruptOp { Erosion, Dilation, DilationGuard };
CorruptOp corrupt_op(const BinaryMask& mask, int radius, uint64_t seed,
                     uint64_t mask_index, uint32_t tau_min = 64);

// argmax_c cos(z_i, class_c); ties to the smallest class id; W = 0 ->
// kUnlabeled.
std::vector<uint32_t> semantic_segment(
    const GaussianFeatureField& field,
    std::span<const QuerySet::Entry> class_embeddings);

// "VMSK" files.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace glift
