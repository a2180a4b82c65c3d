#include "glift/gate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace glift {

namespace {

// Records sorted by descending weight, ties broken by ascending gaussian
// index so the gate is reproducible under input permutations.
std::vector<uint32_t> sorted_order(std::span<const VisibilityRecord> records) {
  std::vector<uint32_t> order(records.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (records[a].weight != records[b].weight)
      return records[a].weight > records[b].weight;
    return records[a].gaussian_index < records[b].gaussian_index;
  });
  return order;
}

size_t mass_prefix(std::span<const VisibilityRecord> records,
                   std::span<const uint32_t> order, double tau_view,
                   double S_tot) {
  const double target = tau_view * S_tot;
  double prefix = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    prefix += records[order[k]].weight;
    if (prefix >= target) return k + 1;
  }
  return order.size();
}

}  // namespace

std::string GateConfig::validate() const {
  if (!(tau_view > 0.0) || tau_view > 1.0)
    throw ConfigError("tau_view must lie in (0,1]");
  if (tau_abs < 0.0) throw ConfigError("tau_abs must be non-negative");
  if (!(q > 0.0) || !(q < 1.0)) throw ConfigError("gate q must lie in (0,1)");
  if (tau_view < 0.5 || tau_view > 0.75) {
    std::ostringstream warn;
    warn << "tau_view " << tau_view << " is outside the default policy band "
         << "[0.5, 0.75]";
    return warn.str();
  }
  return {};
}

double view_score(std::span<const VisibilityRecord> records) {
  double s = 0;
  for (const VisibilityRecord& r : records) s += r.weight;
  return s;
}

std::pair<size_t, std::vector<uint32_t>> stage_a(
    std::span<const VisibilityRecord> records, double tau_view,
    double tau_abs) {
  const double S_tot = view_score(records);
  if (!(S_tot > 0)) return {0, {}};
  const auto order = sorted_order(records);
  const size_t k_mass = mass_prefix(records, order, tau_view, S_tot);
  std::vector<uint32_t> mass_set;
  mass_set.reserve(k_mass);
  for (size_t k = 0; k < k_mass; ++k) {
    if (records[order[k]].weight >= tau_abs)
      mass_set.push_back(records[order[k]].gaussian_index);
  }
  return {k_mass, std::move(mass_set)};
}

size_t stage_b(std::span<const VisibilityRecord> records, double q) {
  if (records.empty()) return 0;
  std::vector<float> weights(records.size());
  for (size_t i = 0; i < records.size(); ++i) weights[i] = records[i].weight;
  std::sort(weights.begin(), weights.end());
  // lower-interpolation order statistic at (1 - q)
  const size_t idx = static_cast<size_t>(
      std::floor((1.0 - q) * static_cast<double>(weights.size() - 1)));
  const float tau_q = weights[idx];
  size_t K_q = 0;
  for (float w : weights)
    if (w >= tau_q) ++K_q;
  return K_q;
}

GateResult gate(std::span<const VisibilityRecord> records,
                const GateConfig& cfg) {
  GateResult res;
  res.S_tot = view_score(records);
  if (records.empty() || !(res.S_tot > 0)) return res;

  const auto order = sorted_order(records);
  res.k_mass = mass_prefix(records, order, cfg.tau_view, res.S_tot);
  res.K_q = stage_b(records, cfg.q);
  res.k_keep = std::min(res.k_mass, res.K_q);

  res.kept.reserve(res.k_keep);
  for (size_t k = 0; k < res.k_keep; ++k) {
    if (records[order[k]].weight >= cfg.tau_abs)
      res.kept.push_back(records[order[k]].gaussian_index);
  }
  return res;
}

}  // namespace glift
