#pragma once

#include "glift/eval.hpp"
#include "glift/labeling.hpp"
#include "glift/splat.hpp"

namespace glift::reference {

// Straightforward serial implementations, kept independent of the parallel
// kernels. Tests compare against them and the benchmark target measures the
// speedup.

// Plain nested loops over pixels, sequential in depth per pixel.
WeightMap per_pixel_weights(const GaussianScene& scene, const Camera& cam);

std::vector<VisibilityRecord> view_visibilities(const GaussianScene& scene,
                                                const Camera& cam,
                                                uint32_t view_index);

// O(N*Q) full-vote labeling: every point votes for every Gaussian, no
// culling, no fallback.
GaussianLabels assign_labels(const GaussianScene& scene,
                             const LabeledPointCloud& cloud,
                             bool use_significance = true);

// Brute-force radius filter for candidate sets.
std::vector<uint32_t> candidate_radius(const Gaussian& g,
                                       const LabeledPointCloud& cloud,
                                       double tau_radius);

// Structuring-element sweep morphology (gather min/max over the disk).
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

}  // namespace glift::reference
