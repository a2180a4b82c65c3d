#pragma once

#include "glift/aggregate.hpp"
#include "glift/eval.hpp"
#include "glift/gate.hpp"
#include "glift/synth.hpp"

#include <functional>

namespace glift {

enum class Aggregator { CosineMedian, WeightedMean, L1Median };

Aggregator aggregator_from_string(const std::string& name);
std::string to_string(Aggregator a);

struct PipelineConfig {
  GateConfig gate;
  Aggregator aggregator = Aggregator::CosineMedian;
  bool gating_enabled = true;
  int weiszfeld_iters = 500;
  double weiszfeld_eps = 1e-10;
};

// Serves one feature map per view so the view loop never holds more than one
// map in memory.
using MapProvider = std::function<FeatureMap(uint32_t view)>;

struct LiftStats {
  size_t aggregator_bytes_peak = 0;
  size_t observations_consumed = 0;
  size_t records_total = 0;
  size_t records_kept = 0;
};

// Per view, ascending: visibilities -> gate (identity when disabled) -> look
// up the center-pixel feature (zero pixels are skipped without consuming
// weight) -> feed the aggregator. The cosine-median path is single-pass with
// O(N d) memory.
GaussianFeatureField lift(const GaussianScene& scene,
                          std::span<const Camera> cameras,
                          const MapProvider& maps, const PipelineConfig& cfg,
                          LiftStats* stats = nullptr);

// Mean (1 - <f, z>) between each Gaussian's streamed observations (same
// gating as `cfg`) and its aggregated feature; scene value averages over
// Gaussians with W > 0.
struct DispersionResult {
  std::vector<double> per_gaussian;  // NaN when never observed
  double scene = 0;
  size_t scored = 0;
};

DispersionResult dispersion_of_field(const GaussianScene& scene,
                                     std::span<const Camera> cameras,
                                     const MapProvider& maps,
                                     const GaussianFeatureField& field,
                                     const PipelineConfig& cfg);

// One ablation cell: a lift configuration evaluated on the occlusion bench.
struct AblationCell {
  bool gating = true;
  Aggregator aggregator = Aggregator::CosineMedian;
};

struct AblationRow {
  AblationCell cell;
  double miou = 0, macc = 0;
  double dispersion = 0;
  double mean_cos_front = 0, mean_cos_back = 0;
  double min_cos_back = 0;
};

std::vector<AblationRow> ablation_run(const OcclusionScene& occ,
                                      std::span<const AblationCell> grid,
                                      const PipelineConfig& base);

}  // namespace glift
