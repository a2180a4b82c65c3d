#include "glift/aggregate.hpp"
#include "glift/rng.hpp"
#include "glift/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace glift;

namespace {

FeatureObservation obs2(float x, float y, double w, int view = 0) {
  FeatureObservation o;
  o.feature = Eigen::Vector2f(x, y);
  o.weight = w;
  o.view_index = view;
  return o;
}

Eigen::VectorXd unit_vec(const CounterRng& rng, uint64_t base, int dim) {
  Eigen::VectorXd v(dim);
  for (int c = 0; c < dim; ++c) v[c] = rng.normal(base + c);
  return v.normalized();
}

double angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

}  // namespace

TEST_SUITE_BEGIN("aggregate");

TEST_CASE("streaming_update fixed points") {
  MedianState st;
  st.z = Eigen::Vector2d(1, 0);
  st.W = 1;

  SUBCASE("observation equal to the estimate") {
    streaming_update(st, Eigen::Vector2d(1, 0), 2.0);
    CHECK(st.z == Eigen::Vector2d(1, 0));
    CHECK(st.W == 3.0);
  }
  SUBCASE("antipodal observation has zero tangent") {
    streaming_update(st, Eigen::Vector2d(-1, 0), 5.0);
    CHECK(st.z == Eigen::Vector2d(1, 0));
    CHECK(st.W == 6.0);
  }
}

TEST_CASE("streaming_update hand-computed step") {
  MedianState st;
  st.z = Eigen::Vector2d(1, 0);
  st.W = 1;
  streaming_update(st, Eigen::Vector2d(0, 1), 1.0);
  // eta = 1/2, z' = Norm(1, 0.5)
  CHECK(st.z.x() == doctest::Approx(0.894427).epsilon(1e-5));
  CHECK(st.z.y() == doctest::Approx(0.447214).epsilon(1e-5));
  CHECK(st.W == 2.0);
  CHECK(st.t == 1);
}

TEST_CASE("aggregate_stream") {
  SUBCASE("identical observations return the direction and total weight") {
    std::vector<FeatureObservation> obs(5, obs2(0, 1, 0.5));
    const MedianState st = aggregate_stream(obs);
    CHECK(st.z.isApprox(Eigen::Vector2d(0, 1), 1e-12));
    CHECK(st.W == doctest::Approx(2.5));
  }
  SUBCASE("two-step hand example") {
    const std::vector<FeatureObservation> obs = {obs2(1, 0, 1.0, 0),
                                                 obs2(0, 1, 1.0, 1)};
    const MedianState st = aggregate_stream(obs);
    CHECK(st.z.x() == doctest::Approx(0.894427).epsilon(1e-4));
    CHECK(st.z.y() == doctest::Approx(0.447214).epsilon(1e-4));
    CHECK(st.W == doctest::Approx(2.0));
  }
  SUBCASE("empty stream is the invalid field convention") {
    const MedianState st = aggregate_stream({});
    CHECK(st.W == 0.0);
    CHECK(st.z.size() == 0);
  }
}

TEST_CASE("streaming invariants over random steps") {
  const CounterRng rng(3, 41);
  const int dim = 16;
  MedianState st;
  st.z = unit_vec(rng, 0, dim);
  double prev_W = 0;
  for (uint64_t t = 1; t <= 2000; ++t) {
    const Eigen::VectorXd f = unit_vec(rng, t * dim, dim);
    const double w = rng.uniform(t, 0.1, 2.0);
    const Eigen::VectorXd z_before = st.z;
    const double angle_before = angle(z_before, f);
    const double eta = w / (st.W + w);

    streaming_update(st, f, w);

    CHECK(std::abs(st.z.norm() - 1.0) < 1e-6);
    CHECK(st.W > prev_W);
    prev_W = st.W;
    // never increases the angle to the observation just consumed
    CHECK(angle(st.z, f) <= angle_before + 1e-9);
    // update magnitude damping
    CHECK((st.z - z_before).norm() <= eta * std::sin(angle_before) + 1e-9);
  }
}

TEST_CASE("weighted_mean") {
  SUBCASE("single observation") {
    const std::vector<FeatureObservation> obs = {obs2(0, 1, 3.0)};
    CHECK(weighted_mean(obs).isApprox(Eigen::Vector2d(0, 1), 1e-12));
  }
  SUBCASE("hand-computed blend") {
    const std::vector<FeatureObservation> obs = {obs2(1, 0, 1.0),
                                                 obs2(0, 1, 3.0)};
    const Eigen::VectorXd m = weighted_mean(obs);
    CHECK(m.x() == doctest::Approx(0.25));
    CHECK(m.y() == doctest::Approx(0.75));
    const Eigen::VectorXd mn = m.normalized();
    CHECK(mn.x() == doctest::Approx(0.316228).epsilon(1e-5));
    CHECK(mn.y() == doctest::Approx(0.948683).epsilon(1e-5));
  }
  SUBCASE("antipodal cancellation") {
    const std::vector<FeatureObservation> obs = {obs2(1, 0, 1.0),
                                                 obs2(-1, 0, 1.0)};
    CHECK(weighted_mean(obs).norm() < 1e-12);
  }
}

TEST_CASE("weiszfeld_median") {
  SUBCASE("symmetric cross has its median at the origin") {
    const std::vector<FeatureObservation> obs = {
        obs2(1, 0, 1), obs2(-1, 0, 1), obs2(0, 1, 1), obs2(0, -1, 1)};
    CHECK(weiszfeld_median(obs).norm() < 1e-8);
  }
  SUBCASE("single point is an anchor") {
    const std::vector<FeatureObservation> obs = {obs2(0.6f, 0.8f, 2.0)};
    CHECK(weiszfeld_median(obs).isApprox(Eigen::Vector2d(0.6f, 0.8f), 1e-9));
  }
  SUBCASE("fermat point of a right triangle against a grid oracle") {
    const std::vector<FeatureObservation> obs = {obs2(0, 0, 1), obs2(1, 0, 1),
                                                 obs2(0, 1, 1)};
    const Eigen::VectorXd med = weiszfeld_median(obs, 2000, 1e-14);

    // oracle: iteratively refined grid search, independent of the iteration
    Eigen::Vector2d best(0.25, 0.25);
    double span = 0.5;
    auto objective = [&](const Eigen::Vector2d& z) {
      return weiszfeld_objective(obs, z);
    };
    for (int level = 0; level < 40; ++level) {
      Eigen::Vector2d local = best;
      double local_obj = objective(best);
      for (int i = -10; i <= 10; ++i) {
        for (int j = -10; j <= 10; ++j) {
          const Eigen::Vector2d cand =
              best + Eigen::Vector2d(i * span / 10, j * span / 10);
          const double obj = objective(cand);
          if (obj < local_obj) {
            local_obj = obj;
            local = cand;
          }
        }
      }
      best = local;
      span *= 0.5;
    }
    CHECK(weiszfeld_objective(obs, med) ==
          doctest::Approx(objective(best)).epsilon(1e-8));
  }
  SUBCASE("objective is non-increasing across iterations") {
    const CounterRng rng(17, 5);
    for (uint64_t trial = 0; trial < 20; ++trial) {
      std::vector<FeatureObservation> obs;
      const int n = 3 + static_cast<int>(rng.uniform(trial) * 20);
      for (int i = 0; i < n; ++i) {
        FeatureObservation o;
        o.feature = unit_vec(rng, (trial * 64 + i) * 8, 8).cast<float>();
        o.weight = rng.uniform(trial * 64 + i, 0.1, 3.0);
        obs.push_back(o);
      }
      std::vector<double> trace;
      weiszfeld_median(obs, 200, 1e-12, &trace);
      for (size_t k = 1; k < trace.size(); ++k)
        CHECK(trace[k] <= trace[k - 1] + 1e-9);
    }
  }
}

TEST_CASE("tangent_gradient") {
  SUBCASE("zero at a consensus") {
    const std::vector<FeatureObservation> obs(4, obs2(1, 0, 1.0));
    CHECK(tangent_gradient(Eigen::Vector2d(1, 0), obs).norm() < 1e-12);
  }
  SUBCASE("zero at the normalized weighted mean") {
    const CounterRng rng(23, 6);
    for (uint64_t trial = 0; trial < 20; ++trial) {
      std::vector<FeatureObservation> obs;
      for (int i = 0; i < 12; ++i) {
        FeatureObservation o;
        o.feature = unit_vec(rng, (trial * 32 + i) * 8, 8).cast<float>();
        o.weight = rng.uniform(trial * 32 + i, 0.1, 2.0);
        obs.push_back(o);
      }
      const Eigen::VectorXd z = weighted_mean(obs).normalized();
      CHECK(tangent_gradient(z, obs).norm() < 1e-8);
    }
  }
  SUBCASE("matches central finite differences of the constrained objective") {
    const CounterRng rng(29, 7);
    const int dim = 8;
    for (uint64_t trial = 0; trial < 30; ++trial) {
      std::vector<FeatureObservation> obs;
      for (int i = 0; i < 10; ++i) {
        FeatureObservation o;
        o.feature = unit_vec(rng, (trial * 32 + i) * dim, dim).cast<float>();
        o.weight = rng.uniform(trial * 32 + i, 0.1, 2.0);
        obs.push_back(o);
      }
      const Eigen::VectorXd z = unit_vec(rng, trial * 1000, dim);
      Eigen::VectorXd v = unit_vec(rng, trial * 1000 + dim, dim);
      v -= v.dot(z) * z;
      v.normalize();

      auto objective = [&](const Eigen::VectorXd& p) {
        double obj = 0;
        for (const auto& o : obs)
          obj += o.weight * (1.0 - o.feature.cast<double>().dot(p));
        return obj;
      };
      const double h = 1e-5;
      const double fd = (objective((z + h * v).normalized()) -
                         objective((z - h * v).normalized())) /
                        (2 * h);
      const double analytic = -tangent_gradient(z, obs).dot(v);
      CHECK(std::abs(fd - analytic) < 1e-5);
    }
  }
}

TEST_CASE("dispersion") {
  const Eigen::VectorXd z = Eigen::Vector2d(1, 0);
  SUBCASE("consensus scores zero") {
    const std::vector<FeatureObservation> obs(3, obs2(1, 0, 1.0));
    CHECK(dispersion(obs, z) == doctest::Approx(0.0));
  }
  SUBCASE("two orthogonal observations") {
    const std::vector<FeatureObservation> obs = {obs2(0, 1, 1.0),
                                                 obs2(0, -1, 1.0)};
    CHECK(dispersion(obs, z) == doctest::Approx(1.0));
  }
  SUBCASE("antipodal maximum") {
    const std::vector<FeatureObservation> obs = {obs2(-1, 0, 1.0)};
    CHECK(dispersion(obs, z) == doctest::Approx(2.0));
  }
}

TEST_CASE("scene_dispersion averages over observed gaussians") {
  GaussianFeatureField field;
  field.dim = 2;
  field.features = {1, 0, 0, 0, 0, 1};
  field.weights = {1.0f, 0.0f, 2.0f};
  std::vector<std::vector<FeatureObservation>> obs(3);
  obs[0] = {obs2(1, 0, 1.0), obs2(0, 1, 1.0)};  // disp 0.5
  obs[2] = {obs2(0, 1, 1.0)};                   // disp 0
  CHECK(scene_dispersion(field, obs) == doctest::Approx(0.25));
}

TEST_CASE("multi-epoch streaming approaches the batch stationary point") {
  const CounterRng rng(47, 9);
  const int dim = 12;
  std::vector<FeatureObservation> obs;
  for (int i = 0; i < 15; ++i) {
    FeatureObservation o;
    o.feature = unit_vec(rng, i * dim, dim).cast<float>();
    o.weight = rng.uniform(i, 0.2, 2.0);
    o.view_index = i;
    obs.push_back(o);
  }
  // the batch stationary point is the normalized weighted mean; re-streaming
  // walks toward it as the cumulative weight grows
  const Eigen::VectorXd batch = weighted_mean(obs).normalized();
  auto angle_to_batch = [&](int epochs) {
    return angle(aggregate_stream_epochs(obs, epochs).z, batch);
  };
  const double e1 = angle_to_batch(1);
  const double e10 = angle_to_batch(10);
  const double e1000 = angle_to_batch(1000);
  CHECK(e10 < e1);
  CHECK(e1000 < e10);
  CHECK(e1000 < 0.15);
  CHECK(tangent_gradient(aggregate_stream_epochs(obs, 1000).z, obs).norm() <
        tangent_gradient(aggregate_stream(obs).z, obs).norm());
}

TEST_CASE("streaming median resists a coherent outlier block") {
  // small version of the acceptance experiment
  int wins = 0;
  for (uint64_t trial = 0; trial < 20; ++trial) {
    StreamSpec spec;
    spec.dim = 64;
    spec.count = 100;
    spec.noise = 0.1;
    spec.outlier_fraction = 0.2;
    spec.arrangement = StreamSpec::Arrangement::Interleaved;
    spec.seed = trial;
    const FeatureStream fs = make_feature_stream(spec);
    const MedianState med = aggregate_stream(fs.observations);
    const Eigen::VectorXd mean = weighted_mean(fs.observations);
    const Eigen::VectorXd gt = fs.direction.cast<double>();
    if (angle(med.z, gt) < angle(mean, gt)) ++wins;
  }
  CHECK(wins >= 16);
}

TEST_SUITE_END();
