#pragma once

#include "glift/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace glift {

struct FeatureObservation {
  Eigen::VectorXf feature;  // unit
  double weight = 1.0;      // > 0
  int32_t view_index = 0;
};

// Constant-memory state of the streaming cosine-loss median: the current
// unit estimate and the cumulative weight. State math runs in double; file
// storage is f32.
struct MedianState {
  Eigen::VectorXd z;
  double W = 0;
  int64_t t = 0;

  bool initialized() const { return z.size() > 0; }
};

// One tangent step: d = f - (f.z) z, eta = w / (W + w),
// z' = Norm(z + eta d) (kept unchanged when the norm degenerates below
// 1e-9), W' = W + w.
void streaming_update(MedianState& state, Eigen::Ref<const Eigen::VectorXd> f,
                      double w);
void streaming_update(MedianState& state, const FeatureObservation& obs);

// Fold of streaming_update over the stream (ordered by ascending view
// index; the first observation initializes z and its update is a no-op).
// Empty stream yields a zero vector with W = 0.
MedianState aggregate_stream(std::span<const FeatureObservation> obs);

// (sum w f) / (sum w); zero vector when the total weight vanishes.
Eigen::VectorXd weighted_mean(std::span<const FeatureObservation> obs);

// Weiszfeld fixed-point iteration for the weighted Euclidean geometric
// median, initialized at the weighted mean. Anchors (distance < 1e-12 to an
// observation) are returned directly. `objective_trace`, when given, records
// the objective value after every iterate.
Eigen::VectorXd weiszfeld_median(std::span<const FeatureObservation> obs,
                                 int max_iters = 500, double eps = 1e-10,
                                 std::vector<double>* objective_trace = nullptr);

double weiszfeld_objective(std::span<const FeatureObservation> obs,
                           Eigen::Ref<const Eigen::VectorXd> z);

// sum w (f - (f.z) z): the negative Riemannian gradient of the weighted
// cosine loss on the sphere at unit z.
Eigen::VectorXd tangent_gradient(Eigen::Ref<const Eigen::VectorXd> z,
                                 std::span<const FeatureObservation> obs);

// Unweighted mean of (1 - <f, z>) over the observations.
double dispersion(std::span<const FeatureObservation> obs,
                  Eigen::Ref<const Eigen::VectorXd> z);

// Unweighted mean of per-Gaussian dispersion over Gaussians with W > 0.
// observations[i] holds Gaussian i's stream.
double scene_dispersion(
    const GaussianFeatureField& field,
    std::span<const std::vector<FeatureObservation>> observations);

// Re-streams the same observations for several epochs. Convergence testing
// only; the production path is single-pass.
MedianState aggregate_stream_epochs(std::span<const FeatureObservation> obs,
                                    int epochs);

}  // namespace glift
