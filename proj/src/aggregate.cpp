#include "glift/aggregate.hpp"

#include <cmath>
#include <stdexcept>

namespace glift {

namespace {
constexpr double kDegenerateNorm = 1e-9;
constexpr double kAnchorDistance = 1e-12;
}  // namespace

void streaming_update(MedianState& state, Eigen::Ref<const Eigen::VectorXd> f,
                      double w) {
  if (!(w > 0)) throw std::invalid_argument("observation weight must be > 0");
  if (!state.initialized()) {
    state.z = f;
    state.z.normalize();
  }
  const double proj = f.dot(state.z);
  const Eigen::VectorXd d = f - proj * state.z;
  const double eta = w / (state.W + w);
  Eigen::VectorXd cand = state.z + eta * d;
  const double n = cand.norm();
  if (n >= kDegenerateNorm) state.z = cand / n;
  state.W += w;
  state.t += 1;
}

void streaming_update(MedianState& state, const FeatureObservation& obs) {
  streaming_update(state, obs.feature.cast<double>().eval(), obs.weight);
}

MedianState aggregate_stream(std::span<const FeatureObservation> obs) {
  MedianState state;
  if (obs.empty()) {
    state.z = Eigen::VectorXd();
    return state;
  }
  state.z = obs.front().feature.cast<double>();
  state.z.normalize();
  for (const FeatureObservation& o : obs) streaming_update(state, o);
  return state;
}

Eigen::VectorXd weighted_mean(std::span<const FeatureObservation> obs) {
  if (obs.empty()) return {};
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(obs.front().feature.size());
  double W = 0;
  for (const FeatureObservation& o : obs) {
    acc += o.weight * o.feature.cast<double>();
    W += o.weight;
  }
  if (!(W > 0)) return Eigen::VectorXd::Zero(acc.size());
  return acc / W;
}

double weiszfeld_objective(std::span<const FeatureObservation> obs,
                           Eigen::Ref<const Eigen::VectorXd> z) {
  double obj = 0;
  for (const FeatureObservation& o : obs)
    obj += o.weight * (z - o.feature.cast<double>()).norm();
  return obj;
}

Eigen::VectorXd weiszfeld_median(std::span<const FeatureObservation> obs,
                                 int max_iters, double eps,
                                 std::vector<double>* objective_trace) {
  if (obs.empty()) throw std::invalid_argument("weiszfeld: empty input");
  Eigen::VectorXd z = weighted_mean(obs);
  if (objective_trace) objective_trace->push_back(weiszfeld_objective(obs, z));
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd num = Eigen::VectorXd::Zero(z.size());
    double den = 0;
    bool at_anchor = false;
    for (const FeatureObservation& o : obs) {
      const Eigen::VectorXd f = o.feature.cast<double>();
      const double dist = (z - f).norm();
      if (dist < kAnchorDistance) {
        z = f;
        at_anchor = true;
        break;
      }
      num += (o.weight / dist) * f;
      den += o.weight / dist;
    }
    if (at_anchor) {
      if (objective_trace)
        objective_trace->push_back(weiszfeld_objective(obs, z));
      break;
    }
    const Eigen::VectorXd next = num / den;
    const double step = (next - z).norm();
    z = next;
    if (objective_trace)
      objective_trace->push_back(weiszfeld_objective(obs, z));
    if (step < eps) break;
  }
  return z;
}

Eigen::VectorXd tangent_gradient(Eigen::Ref<const Eigen::VectorXd> z,
                                 std::span<const FeatureObservation> obs) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(z.size());
  for (const FeatureObservation& o : obs) {
    const Eigen::VectorXd f = o.feature.cast<double>();
    g += o.weight * (f - f.dot(z) * z);
  }
  return g;
}

double dispersion(std::span<const FeatureObservation> obs,
                  Eigen::Ref<const Eigen::VectorXd> z) {
  if (obs.empty()) throw std::invalid_argument("dispersion: empty input");
  double sum = 0;
  for (const FeatureObservation& o : obs)
    sum += 1.0 - o.feature.cast<double>().dot(z);
  return sum / static_cast<double>(obs.size());
}

double scene_dispersion(
    const GaussianFeatureField& field,
    std::span<const std::vector<FeatureObservation>> observations) {
  if (observations.size() != field.count())
    throw std::invalid_argument("scene_dispersion: size mismatch");
  double sum = 0;
  size_t scored = 0;
  for (size_t i = 0; i < field.count(); ++i) {
    if (field.weights[i] == 0.0f || observations[i].empty()) continue;
    sum += dispersion(observations[i],
                      field.feature_vec(i).cast<double>().eval());
    ++scored;
  }
  return scored ? sum / static_cast<double>(scored) : 0.0;
}

MedianState aggregate_stream_epochs(std::span<const FeatureObservation> obs,
                                    int epochs) {
  MedianState state = aggregate_stream(obs);
  for (int e = 1; e < epochs; ++e)
    for (const FeatureObservation& o : obs) streaming_update(state, o);
  return state;
}

}  // namespace glift
