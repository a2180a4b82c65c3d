#include "glift/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace glift {

Aggregator aggregator_from_string(const std::string& name) {
  if (name == "cosine-median") return Aggregator::CosineMedian;
  if (name == "weighted-mean") return Aggregator::WeightedMean;
  if (name == "l1-median") return Aggregator::L1Median;
  throw ConfigError("unknown aggregator '" + name + "'");
}

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::CosineMedian: return "cosine-median";
    case Aggregator::WeightedMean: return "weighted-mean";
    case Aggregator::L1Median: return "l1-median";
  }
  return "?";
}

namespace {

constexpr double kDegenerateNorm = 1e-9;

// Flat-array aggregator backends. Updates touch one Gaussian each, so the
// per-view fan-out can run in parallel; views themselves are consumed
// strictly in ascending order.
class AggregatorBank {
 public:
  virtual ~AggregatorBank() = default;
  virtual void consume(uint32_t gaussian, const float* f, double w) = 0;
  virtual void finalize(GaussianFeatureField& field) = 0;
  virtual size_t bytes() const = 0;
};

class CosineMedianBank final : public AggregatorBank {
 public:
  CosineMedianBank(size_t n, uint32_t dim)
      : dim_(dim), z_(n * dim, 0.0), W_(n, 0.0), seen_(n, 0) {}

  void consume(uint32_t i, const float* f, double w) override {
    // thread-local scratch keeps consume() reentrant across OpenMP threads
    thread_local std::vector<double> scratch;
    if (scratch.size() < dim_) scratch.resize(dim_);

    double* z = z_.data() + static_cast<size_t>(i) * dim_;
    if (!seen_[i]) {
      double n2 = 0;
      for (uint32_t c = 0; c < dim_; ++c) n2 += double(f[c]) * f[c];
      const double inv = 1.0 / std::sqrt(n2);
      for (uint32_t c = 0; c < dim_; ++c) z[c] = f[c] * inv;
      seen_[i] = 1;
    }
    double proj = 0;
    for (uint32_t c = 0; c < dim_; ++c) proj += f[c] * z[c];
    const double eta = w / (W_[i] + w);
    double n2 = 0;
    for (uint32_t c = 0; c < dim_; ++c) {
      const double cand = z[c] + eta * (f[c] - proj * z[c]);
      scratch[c] = cand;
      n2 += cand * cand;
    }
    const double n = std::sqrt(n2);
    if (n >= kDegenerateNorm)
      for (uint32_t c = 0; c < dim_; ++c) z[c] = scratch[c] / n;
    W_[i] += w;
  }

  void finalize(GaussianFeatureField& field) override {
    for (size_t i = 0; i < W_.size(); ++i) {
      if (!seen_[i]) continue;
      field.weights[i] = static_cast<float>(W_[i]);
      const double* z = z_.data() + i * dim_;
      float* out = field.feature(i);
      for (uint32_t c = 0; c < dim_; ++c) out[c] = static_cast<float>(z[c]);
    }
  }

  size_t bytes() const override {
    return z_.capacity() * sizeof(double) + W_.capacity() * sizeof(double) +
           seen_.capacity();
  }

 private:
  uint32_t dim_;
  std::vector<double> z_;
  std::vector<double> W_;
  std::vector<uint8_t> seen_;
};

class MeanBank final : public AggregatorBank {
 public:
  MeanBank(size_t n, uint32_t dim) : dim_(dim), acc_(n * dim, 0.0), W_(n, 0.0) {}

  void consume(uint32_t i, const float* f, double w) override {
    double* a = acc_.data() + static_cast<size_t>(i) * dim_;
    for (uint32_t c = 0; c < dim_; ++c) a[c] += w * f[c];
    W_[i] += w;
  }

  void finalize(GaussianFeatureField& field) override {
    for (size_t i = 0; i < W_.size(); ++i) {
      if (!(W_[i] > 0)) continue;
      const double* a = acc_.data() + i * dim_;
      double n2 = 0;
      for (uint32_t c = 0; c < dim_; ++c) n2 += a[c] * a[c];
      const double n = std::sqrt(n2);
      if (n < kDegenerateNorm) continue;  // cancellation: stays invalid
      field.weights[i] = static_cast<float>(W_[i]);
      float* out = field.feature(i);
      for (uint32_t c = 0; c < dim_; ++c)
        out[c] = static_cast<float>(a[c] / n);
    }
  }

  size_t bytes() const override {
    return acc_.capacity() * sizeof(double) + W_.capacity() * sizeof(double);
  }

 private:
  uint32_t dim_;
  std::vector<double> acc_;
  std::vector<double> W_;
};

// Buffers every observation; memory grows with the view count by design.
class WeiszfeldBank final : public AggregatorBank {
 public:
  WeiszfeldBank(size_t n, uint32_t dim, int iters, double eps)
      : dim_(dim), iters_(iters), eps_(eps), obs_(n) {}

  void consume(uint32_t i, const float* f, double w) override {
    FeatureObservation o;
    o.feature = Eigen::Map<const Eigen::VectorXf>(f, dim_);
    o.weight = w;
    obs_[i].push_back(std::move(o));
  }

  void finalize(GaussianFeatureField& field) override {
#pragma omp parallel for schedule(dynamic, 64)
    for (int64_t i = 0; i < static_cast<int64_t>(obs_.size()); ++i) {
      if (obs_[i].empty()) continue;
      const Eigen::VectorXd med = weiszfeld_median(obs_[i], iters_, eps_);
      const double n = med.norm();
      if (n < kDegenerateNorm) continue;
      double W = 0;
      for (const FeatureObservation& o : obs_[i]) W += o.weight;
      field.weights[i] = static_cast<float>(W);
      float* out = field.feature(i);
      for (uint32_t c = 0; c < dim_; ++c)
        out[c] = static_cast<float>(med[c] / n);
    }
  }

  size_t bytes() const override {
    size_t b = obs_.capacity() * sizeof(obs_[0]);
    for (const auto& v : obs_)
      b += v.capacity() * (sizeof(FeatureObservation) + dim_ * sizeof(float));
    return b;
  }

 private:
  uint32_t dim_;
  int iters_;
  double eps_;
  std::vector<std::vector<FeatureObservation>> obs_;
};

std::unique_ptr<AggregatorBank> make_bank(const PipelineConfig& cfg, size_t n,
                                          uint32_t dim) {
  switch (cfg.aggregator) {
    case Aggregator::CosineMedian:
      return std::make_unique<CosineMedianBank>(n, dim);
    case Aggregator::WeightedMean:
      return std::make_unique<MeanBank>(n, dim);
    case Aggregator::L1Median:
      return std::make_unique<WeiszfeldBank>(n, dim, cfg.weiszfeld_iters,
                                             cfg.weiszfeld_eps);
  }
  throw ConfigError("invalid aggregator");
}

// Shared view walk for lift and dispersion: yields (record, feature pointer)
// for every gated record whose center pixel carries a feature.
template <typename Fn>
void for_each_kept_observation(const GaussianScene& scene,
                               std::span<const Camera> cameras,
                               const MapProvider& maps,
                               const PipelineConfig& cfg, LiftStats* stats,
                               Fn&& fn) {
  uint32_t dim = 0;
  for (uint32_t view = 0; view < cameras.size(); ++view) {
    const Camera& cam = cameras[view];
    const FeatureMap map = maps(view);
    if (map.height != cam.height || map.width != cam.width)
      throw ValidationError("feature map resolution does not match camera " +
                            std::to_string(view));
    if (dim == 0)
      dim = map.dim;
    else if (map.dim != dim)
      throw ValidationError("feature map dimension changes at view " +
                            std::to_string(view));

    const std::vector<VisibilityRecord> records =
        view_visibilities(scene, cam, view);
    if (stats) stats->records_total += records.size();

    // gate, or identity pass-through reproducing the ungated baseline
    std::vector<uint32_t> kept_positions;
    if (cfg.gating_enabled) {
      const GateResult gr = gate(records, cfg.gate);
      kept_positions.reserve(gr.kept.size());
      for (uint32_t gi : gr.kept) {
        const auto it = std::lower_bound(
            records.begin(), records.end(), gi,
            [](const VisibilityRecord& r, uint32_t v) {
              return r.gaussian_index < v;
            });
        kept_positions.push_back(
            static_cast<uint32_t>(it - records.begin()));
      }
      std::sort(kept_positions.begin(), kept_positions.end());
    } else {
      kept_positions.resize(records.size());
      std::iota(kept_positions.begin(), kept_positions.end(), 0u);
    }
    if (stats) stats->records_kept += kept_positions.size();

#pragma omp parallel for schedule(static)
    for (int64_t k = 0; k < static_cast<int64_t>(kept_positions.size()); ++k) {
      const VisibilityRecord& rec = records[kept_positions[k]];
      if (map.pixel_is_zero(rec.pixel.y(), rec.pixel.x())) continue;
      fn(rec, map.pixel(rec.pixel.y(), rec.pixel.x()), dim);
    }
  }
}

}  // namespace

GaussianFeatureField lift(const GaussianScene& scene,
                          std::span<const Camera> cameras,
                          const MapProvider& maps, const PipelineConfig& cfg,
                          LiftStats* stats) {
  cfg.gate.validate();
  if (cameras.empty()) throw ConfigError("lift: no cameras");

  // Dimension comes from the first map; the bank is sized once.
  const FeatureMap first = maps(0);
  const uint32_t dim = first.dim;
  if (dim == 0) throw ValidationError("feature maps have zero dimension");

  GaussianFeatureField field;
  field.dim = dim;
  field.features.assign(scene.size() * dim, 0.0f);
  field.weights.assign(scene.size(), 0.0f);

  auto bank = make_bank(cfg, scene.size(), dim);
  size_t peak = bank->bytes();
  size_t consumed = 0;

  for_each_kept_observation(
      scene, cameras, maps, cfg, stats,
      [&](const VisibilityRecord& rec, const float* f, uint32_t) {
        bank->consume(rec.gaussian_index, f, rec.weight);
#pragma omp atomic
        ++consumed;
      });
  peak = std::max(peak, bank->bytes());

  bank->finalize(field);
  if (stats) {
    stats->aggregator_bytes_peak = peak;
    stats->observations_consumed = consumed;
  }
  validate(field);
  return field;
}

DispersionResult dispersion_of_field(const GaussianScene& scene,
                                     std::span<const Camera> cameras,
                                     const MapProvider& maps,
                                     const GaussianFeatureField& field,
                                     const PipelineConfig& cfg) {
  if (field.count() != scene.size())
    throw ValidationError("dispersion: field/scene size mismatch");
  std::vector<double> sum(scene.size(), 0.0);
  std::vector<uint32_t> count(scene.size(), 0);

  for_each_kept_observation(
      scene, cameras, maps, cfg, nullptr,
      [&](const VisibilityRecord& rec, const float* f, uint32_t dim) {
        const uint32_t i = rec.gaussian_index;
        if (field.weights[i] == 0.0f) return;
        double dot = 0;
        const float* z = field.feature(i);
        for (uint32_t c = 0; c < dim; ++c) dot += double(f[c]) * z[c];
        sum[i] += 1.0 - dot;
        ++count[i];
      });

  DispersionResult res;
  res.per_gaussian.assign(scene.size(),
                          std::numeric_limits<double>::quiet_NaN());
  double total = 0;
  for (size_t i = 0; i < scene.size(); ++i) {
    if (count[i] == 0) continue;
    res.per_gaussian[i] = sum[i] / count[i];
    total += res.per_gaussian[i];
    ++res.scored;
  }
  res.scene = res.scored ? total / static_cast<double>(res.scored) : 0.0;
  return res;
}

std::vector<AblationRow> ablation_run(const OcclusionScene& occ,
                                      std::span<const AblationCell> grid,
                                      const PipelineConfig& base) {
  const MapProvider provider = [&](uint32_t view) { return occ.maps[view]; };
  std::vector<QuerySet::Entry> classes(2);
  classes[0] = {"front", occ.front_feature};
  classes[1] = {"back", occ.back_feature};

  std::vector<AblationRow> rows;
  for (const AblationCell& cell : grid) {
    PipelineConfig cfg = base;
    cfg.gating_enabled = cell.gating;
    cfg.aggregator = cell.aggregator;

    AblationRow row;
    row.cell = cell;
    const GaussianFeatureField field =
        lift(occ.scene, occ.cameras, provider, cfg);

    // Gaussians that never received a feature stay out of the metrics.
    const std::vector<uint32_t> pred_all = semantic_segment(field, classes);
    std::vector<uint32_t> pred, gt;
    for (size_t i = 0; i < occ.scene.size(); ++i) {
      if (field.weights[i] == 0.0f) continue;
      pred.push_back(pred_all[i]);
      gt.push_back(occ.wall[i]);
    }
    const SegMetrics m = miou_macc(pred, gt, 2);
    row.miou = m.miou;
    row.macc = m.macc;
    row.dispersion =
        dispersion_of_field(occ.scene, occ.cameras, provider, field, cfg)
            .scene;

    double cos_front = 0, cos_back = 0, min_back = 2.0;
    size_t n_front = 0, n_back = 0;
    for (size_t i = 0; i < occ.scene.size(); ++i) {
      if (field.weights[i] == 0.0f) continue;
      const Eigen::VectorXf& gtf =
          occ.wall[i] == 0 ? occ.front_feature : occ.back_feature;
      const double c =
          field.feature_vec(i).cast<double>().dot(gtf.cast<double>());
      if (occ.wall[i] == 0) {
        cos_front += c;
        ++n_front;
      } else {
        cos_back += c;
        ++n_back;
        min_back = std::min(min_back, c);
      }
    }
    row.mean_cos_front = n_front ? cos_front / n_front : 0.0;
    row.mean_cos_back = n_back ? cos_back / n_back : 0.0;
    row.min_cos_back = n_back ? min_back : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace glift
