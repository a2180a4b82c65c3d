#include "glift/reference.hpp"
#include "glift/rng.hpp"
#include "glift/splat.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <filesystem>

using namespace glift;

namespace {

Camera basic_camera(uint32_t size = 64, float focal = 100.0f) {
  Camera cam;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = 0.5f * static_cast<float>(size);
  cam.width = cam.height = size;
  return cam;
}

// Gaussian sitting on the optical axis at the given depth.
Gaussian axis_gaussian(float depth, float scale, float opacity) {
  Gaussian g;
  g.mean = {0, 0, depth};
  g.scale = {scale, scale, scale};
  g.opacity = opacity;
  return g;
}

GaussianScene random_scene(size_t n, uint64_t seed) {
  const CounterRng rng(seed, 21);
  GaussianScene scene;
  for (size_t i = 0; i < n; ++i) {
    Gaussian g;
    g.mean = {static_cast<float>(rng.uniform(i * 16 + 0, -1.5, 1.5)),
              static_cast<float>(rng.uniform(i * 16 + 1, -1.5, 1.5)),
              static_cast<float>(rng.uniform(i * 16 + 2, 0.5, 6.0))};
    for (int k = 0; k < 3; ++k)
      g.scale[k] = static_cast<float>(rng.uniform(i * 16 + 3 + k, 0.02, 0.4));
    Eigen::Vector4f q;
    for (int k = 0; k < 4; ++k)
      q[k] = static_cast<float>(rng.uniform(i * 16 + 6 + k, -1, 1));
    g.rotation = Eigen::Quaternionf(q[0], q[1], q[2], q[3]).normalized();
    g.opacity = static_cast<float>(rng.uniform(i * 16 + 10, 0.05, 1.0));
    scene.gaussians.push_back(g);
  }
  return scene;
}

bool weight_maps_equal(const WeightMap& a, const WeightMap& b) {
  if (a.height != b.height || a.width != b.width) return false;
  for (size_t px = 0; px < a.pixels.size(); ++px) {
    if (a.pixels[px].size() != b.pixels[px].size()) return false;
    for (size_t k = 0; k < a.pixels[px].size(); ++k) {
      if (a.pixels[px][k].index != b.pixels[px][k].index) return false;
      if (a.pixels[px][k].weight != b.pixels[px][k].weight) return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("splat");

TEST_CASE("project_gaussian: axis case") {
  const Camera cam = basic_camera();
  const auto pg = project_gaussian(axis_gaussian(2.0f, 0.1f, 0.8f), cam);
  REQUIRE(pg.has_value());
  CHECK(pg->mean2d.x() == doctest::Approx(cam.cx).epsilon(1e-9));
  CHECK(pg->mean2d.y() == doctest::Approx(cam.cy).epsilon(1e-9));
  CHECK(pg->depth == doctest::Approx(2.0));
  // J = diag(fx/z, fy/z) -> cov = (100 * 0.1 / 2)^2 + 0.3 on the diagonal
  CHECK(pg->cov2d(0, 0) == doctest::Approx(25.3).epsilon(1e-5));
  CHECK(pg->cov2d(1, 1) == doctest::Approx(25.3).epsilon(1e-5));
  CHECK(std::abs(pg->cov2d(0, 1)) < 1e-9);
}

TEST_CASE("project_gaussian: culling") {
  const Camera cam = basic_camera();
  SUBCASE("behind the camera") {
    CHECK_FALSE(project_gaussian(axis_gaussian(-1.0f, 0.1f, 0.5f), cam));
  }
  SUBCASE("at the near plane") {
    CHECK_FALSE(project_gaussian(axis_gaussian(0.005f, 0.1f, 0.5f), cam));
  }
  SUBCASE("outside the padded rectangle") {
    Gaussian g = axis_gaussian(2.0f, 0.1f, 0.5f);
    g.mean.x() = 10.0f;  // u = 100*10/2 + 32 = 532 >> 1.3 * 64
    CHECK_FALSE(project_gaussian(g, cam));
  }
  SUBCASE("inside the pad survives") {
    Gaussian g = axis_gaussian(2.0f, 0.1f, 0.5f);
    g.mean.x() = -0.75f;  // u = -5.5, inside the 1.3x pad
    CHECK(project_gaussian(g, cam).has_value());
  }
}

TEST_CASE("project_gaussian: mean invariant to the gaussian's rotation") {
  const Camera cam = basic_camera();
  Gaussian g = axis_gaussian(3.0f, 0.2f, 0.5f);
  const auto base = project_gaussian(g, cam);
  g.rotation = Eigen::Quaternionf(Eigen::AngleAxisf(
      0.7f, Eigen::Vector3f(1, 2, 3).normalized()));
  const auto rotated = project_gaussian(g, cam);
  REQUIRE(base.has_value());
  REQUIRE(rotated.has_value());
  CHECK(base->mean2d == rotated->mean2d);
}

TEST_CASE("density_at analytic cases") {
  ProjectedGaussian pg;
  pg.mean2d = {10, 10};
  SUBCASE("peak is one") {
    pg.cov2d = Eigen::Matrix2d::Identity();
    CHECK(density_at(pg, {10, 10}) == doctest::Approx(1.0));
  }
  SUBCASE("unit covariance at distance one") {
    pg.cov2d = Eigen::Matrix2d::Identity();
    CHECK(density_at(pg, {11, 10}) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  }
  SUBCASE("anisotropic mahalanobis distance one") {
    pg.cov2d = Eigen::Vector2d(4, 1).asDiagonal();
    CHECK(density_at(pg, {12, 10}) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  }
  SUBCASE("strictly decreasing in mahalanobis distance") {
    pg.cov2d << 2.0, 0.3, 0.3, 1.0;
    double prev = 2.0;
    for (int k = 0; k <= 10; ++k) {
      const double rho = density_at(pg, {10 + 0.5 * k, 10 - 0.25 * k});
      CHECK(rho < prev);
      prev = rho;
    }
  }
}

TEST_CASE("alpha_at: scale by opacity, cap, skip threshold") {
  const Camera cam = basic_camera();
  Gaussian g = axis_gaussian(2.0f, 0.5f, 0.8f);
  const auto pg = project_gaussian(g, cam);
  REQUIRE(pg.has_value());
  CHECK(alpha_at(g, *pg, pg->mean2d) == doctest::Approx(0.8).epsilon(1e-6));

  g.opacity = 1.0f;
  CHECK(alpha_at(g, *pg, pg->mean2d) == 0.99);

  g.opacity = 0.8f;
  // far from the mean the product drops below 1/255 and snaps to zero
  const Eigen::Vector2d far =
      pg->mean2d + Eigen::Vector2d(90.0, 0.0);
  CHECK(alpha_at(g, *pg, far) == 0.0);
}

TEST_CASE("view_visibilities: occlusion chains") {
  Camera cam = basic_camera();
  cam.cx = cam.cy = 32.0f;  // integer center so the peak lands on a sample

  auto co_located = [&](std::initializer_list<std::pair<float, float>>
                            depth_opacity) {
    GaussianScene scene;
    for (const auto& [depth, opacity] : depth_opacity)
      scene.gaussians.push_back(axis_gaussian(depth, 0.5f, opacity));
    return view_visibilities(scene, cam, 0);
  };

  SUBCASE("single gaussian keeps its alpha") {
    const auto recs = co_located({{2.0f, 0.8f}});
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].weight == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(recs[0].pixel == Eigen::Vector2i(32, 32));
  }
  SUBCASE("two on the same ray") {
    const auto recs = co_located({{2.0f, 0.6f}, {3.0f, 0.5f}});
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].weight == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(recs[1].weight == doctest::Approx(0.2).epsilon(1e-6));
  }
  SUBCASE("three on the same ray") {
    const auto recs = co_located({{2.0f, 0.6f}, {3.0f, 0.5f}, {4.0f, 0.5f}});
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].weight == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(recs[1].weight == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(recs[2].weight == doctest::Approx(0.1).epsilon(1e-6));
    double sum = 0;
    for (const auto& r : recs) sum += r.weight;
    CHECK(sum <= 1.0 + 1e-5);
  }
}

TEST_CASE("opaque occluder suppresses whatever sits behind it") {
  Camera cam = basic_camera();
  cam.cx = cam.cy = 32.0f;
  GaussianScene scene;
  scene.gaussians.push_back(axis_gaussian(3.0f, 0.5f, 0.9f));
  const float unoccluded = view_visibilities(scene, cam, 0)[0].weight;

  scene.gaussians.insert(scene.gaussians.begin(),
                         axis_gaussian(2.0f, 0.5f, 1.0f));  // alpha-capped
  const auto recs = view_visibilities(scene, cam, 0);
  float occluded = 0;
  for (const auto& r : recs)
    if (r.gaussian_index == 1) occluded = r.weight;
  CHECK(occluded < 0.01f * unoccluded + 1e-6f);
}

TEST_CASE("per_pixel_weights: invariants on random scenes") {
  const Camera cam = basic_camera();
  SUBCASE("empty scene") {
    const WeightMap wm = per_pixel_weights({}, cam);
    for (const auto& px : wm.pixels) CHECK(px.empty());
  }
  SUBCASE("sums and transmittance") {
    const GaussianScene scene = random_scene(50, 5);
    const WeightMap wm = per_pixel_weights(scene, cam);
    for (const auto& px : wm.pixels) {
      double sum = 0;
      for (const auto& e : px) {
        CHECK(e.weight > 0.0f);
        sum += e.weight;
      }
      CHECK(sum <= 1.0 + 1e-5);
    }
  }
}

TEST_CASE("center-pixel agreement between the two paths is exact") {
  const Camera cam = basic_camera();
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const GaussianScene scene = random_scene(60, seed);
    const WeightMap wm = per_pixel_weights(scene, cam);
    const auto recs = view_visibilities(scene, cam, 7);
    CHECK(!recs.empty());
    for (const auto& rec : recs) {
      CHECK(rec.view_index == 7);
      float from_map = -1;
      for (const auto& e : wm.at(rec.pixel.y(), rec.pixel.x()))
        if (e.index == rec.gaussian_index) from_map = e.weight;
      CHECK(rec.weight == from_map);  // bitwise
    }
  }
}

TEST_CASE("parallel schedule does not change results") {
  const GaussianScene scene = random_scene(80, 9);
  const Camera cam = basic_camera();
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const WeightMap serial = per_pixel_weights(scene, cam);
  const auto recs1 = view_visibilities(scene, cam, 0);
  omp_set_num_threads(2);
  const WeightMap parallel = per_pixel_weights(scene, cam);
  const auto recs2 = view_visibilities(scene, cam, 0);
  omp_set_num_threads(saved);
  CHECK(weight_maps_equal(serial, parallel));
  REQUIRE(recs1.size() == recs2.size());
  for (size_t i = 0; i < recs1.size(); ++i)
    CHECK(recs1[i].weight == recs2[i].weight);
}

TEST_CASE("matches the serial reference implementation") {
  const GaussianScene scene = random_scene(40, 13);
  const Camera cam = basic_camera();
  const WeightMap wm = per_pixel_weights(scene, cam);
  const WeightMap ref = reference::per_pixel_weights(scene, cam);
  CHECK(weight_maps_equal(wm, ref));

  const auto recs = view_visibilities(scene, cam, 3);
  const auto ref_recs = reference::view_visibilities(scene, cam, 3);
  REQUIRE(recs.size() == ref_recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].gaussian_index == ref_recs[i].gaussian_index);
    CHECK(recs[i].weight == ref_recs[i].weight);
  }
}

TEST_CASE("weight map dump round trip") {
  const GaussianScene scene = random_scene(20, 17);
  const Camera cam = basic_camera(32);
  const WeightMap wm = per_pixel_weights(scene, cam);
  const auto path =
      std::filesystem::temp_directory_path() / "glift_wm_test.vwmp";
  save_weight_map(wm, path);
  CHECK(weight_maps_equal(wm, load_weight_map(path)));
}

TEST_SUITE_END();
