#pragma once

#include "glift/splat.hpp"

#include <span>

namespace glift {

// Two-stage visibility-aware gate: mass coverage (shortest descending-weight
// prefix reaching tau_view of the view score, floored at tau_abs), then a
// quantile-derived cardinality cap.
struct GateConfig {
  double tau_view = 0.6;
  double tau_abs = 1e-4;
  double q = 0.1;

  // Throws ConfigError when outside (0,1]; returns a warning string when
  // tau_view leaves the default [0.5, 0.75] policy band.
  std::string validate() const;
};

struct GateResult {
  std::vector<uint32_t> kept;  // gaussian indices, descending weight
  size_t k_mass = 0;
  size_t K_q = 0;
  size_t k_keep = 0;
  double S_tot = 0;
};

double view_score(std::span<const VisibilityRecord> records);

// Stage A: k_mass and the floored mass-coverage set (gaussian indices).
std::pair<size_t, std::vector<uint32_t>> stage_a(
    std::span<const VisibilityRecord> records, double tau_view,
    double tau_abs);

// Stage B: K_q = |{w >= tau_q}| with tau_q the lower-interpolation
// (1-q)-quantile of the weight multiset.
size_t stage_b(std::span<const VisibilityRecord> records, double q);

GateResult gate(std::span<const VisibilityRecord> records,
                const GateConfig& cfg);

}  // namespace glift
