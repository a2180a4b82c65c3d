#include "glift/io.hpp"
#include "glift/rng.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <filesystem>
#include <fstream>
#include <limits>

using namespace glift;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "glift_io_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir / name;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GaussianScene random_scene(size_t n, uint64_t seed) {
  const CounterRng rng(seed, 11);
  GaussianScene scene;
  for (size_t i = 0; i < n; ++i) {
    Gaussian g;
    for (int k = 0; k < 3; ++k)
      g.mean[k] = static_cast<float>(rng.uniform(i * 16 + k, -3, 3));
    for (int k = 0; k < 3; ++k)
      g.scale[k] = static_cast<float>(rng.uniform(i * 16 + 3 + k, 0.05, 0.6));
    Eigen::Vector4f q;
    for (int k = 0; k < 4; ++k)
      q[k] = static_cast<float>(rng.uniform(i * 16 + 6 + k, -1, 1));
    q.normalize();
    g.rotation = Eigen::Quaternionf(q[0], q[1], q[2], q[3]).normalized();
    g.opacity = static_cast<float>(rng.uniform(i * 16 + 10, 0.05, 1.0));
    scene.gaussians.push_back(g);
  }
  return scene;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("scene: single identity gaussian") {
  GaussianScene scene;
  Gaussian g;
  g.opacity = 0.8f;
  scene.gaussians.push_back(g);
  const auto path = temp_file("single.vgsc");
  save_scene(scene, path);
  const GaussianScene loaded = load_scene(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded.gaussians[0].mean == Eigen::Vector3f::Zero());
  CHECK(loaded.gaussians[0].scale == Eigen::Vector3f::Ones());
  CHECK(loaded.gaussians[0].opacity == 0.8f);
}

TEST_CASE("scene: round-trip is byte identical") {
  const GaussianScene scene = random_scene(64, 1);
  const auto p1 = temp_file("rt1.vgsc");
  const auto p2 = temp_file("rt2.vgsc");
  save_scene(scene, p1);
  save_scene(load_scene(p1), p2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("scene: validation and format errors") {
  GaussianScene scene;
  scene.gaussians.push_back({});

  SUBCASE("zero opacity rejected") {
    scene.gaussians[0].opacity = 0.0f;
    CHECK_THROWS_AS(save_scene(scene, temp_file("bad.vgsc")), ValidationError);
  }
  SUBCASE("non-positive scale rejected with index") {
    scene.gaussians.push_back({});
    scene.gaussians[1].scale.y() = -1.0f;
    try {
      save_scene(scene, temp_file("bad.vgsc"));
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("gaussian 1") != std::string::npos);
    }
  }
  SUBCASE("bad magic") {
    const auto path = temp_file("badmagic.vgsc");
    std::ofstream(path, std::ios::binary) << "NOPE restoffile";
    CHECK_THROWS_AS(load_scene(path), FormatError);
  }
  SUBCASE("NaN scale in the file names the gaussian") {
    const auto path = temp_file("nan.vgsc");
    std::ofstream out(path, std::ios::binary);
    out.write("VGSC", 4);
    const uint32_t version = 1;
    const uint64_t count = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 8);
    float vals[11] = {0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0.5f};
    vals[4] = std::numeric_limits<float>::quiet_NaN();
    out.write(reinterpret_cast<const char*>(vals), sizeof vals);
    out.close();
    try {
      load_scene(path);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("gaussian 0") != std::string::npos);
    }
  }
  SUBCASE("truncated file") {
    const auto path = temp_file("trunc.vgsc");
    save_scene(random_scene(4, 2), path);
    auto bytes = slurp(path);
    bytes.resize(bytes.size() - 7);
    std::ofstream(path, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_scene(path), FormatError);
  }
}

TEST_CASE("scene: quaternion renormalization policy") {
  const auto path = temp_file("quat.vgsc");
  GaussianScene scene = random_scene(1, 3);

  // perturb the stored quaternion directly in the file
  auto write_with_norm = [&](float s) {
    save_scene(scene, path);
    auto bytes = slurp(path);
    float q[4];
    std::memcpy(q, bytes.data() + 16 + 24, 16);
    for (float& v : q) v *= s;
    std::memcpy(bytes.data() + 16 + 24, q, 16);
    std::ofstream(path, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };

  write_with_norm(1.0f + 5e-4f);  // within 1e-3: renormalized
  const GaussianScene ok = load_scene(path);
  CHECK(std::abs(ok.gaussians[0].rotation.norm() - 1.0f) < 1e-6f);

  write_with_norm(1.01f);  // beyond 1e-3: rejected
  CHECK_THROWS_AS(load_scene(path), ValidationError);
}

TEST_CASE("covariance_of analytic cases") {
  Gaussian g;
  SUBCASE("identity") {
    CHECK((covariance_of(g) - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  }
  SUBCASE("axis aligned scale") {
    g.scale = {2, 1, 1};
    const Eigen::Vector3d expect(4, 1, 1);
    CHECK((covariance_of(g).diagonal() - expect).norm() < 1e-6);
    CHECK(std::abs(covariance_of(g)(0, 1)) < 1e-9);
  }
  SUBCASE("90 degree rotation about z swaps x/y variances") {
    g.scale = {2, 1, 1};
    g.rotation = Eigen::Quaternionf(
        Eigen::AngleAxisf(static_cast<float>(M_PI / 2),
                          Eigen::Vector3f::UnitZ()));
    const Eigen::Matrix3d cov = covariance_of(g);
    CHECK(cov(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cov(1, 1) == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(cov(2, 2) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("covariance_of eigenvalues equal squared scales") {
  const GaussianScene scene = random_scene(50, 4);
  for (const Gaussian& g : scene.gaussians) {
    const Eigen::Matrix3d cov = covariance_of(g);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-7);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Eigen::Vector3d expect = g.scale.cast<double>().array().square();
    std::sort(expect.data(), expect.data() + 3);
    CHECK((es.eigenvalues() - expect).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("feature map: validation") {
  FeatureMap map;
  map.height = 2;
  map.width = 2;
  map.dim = 2;
  map.data = {1, 0, 1, 0, 1, 0, 1, 0};
  CHECK_NOTHROW(validate(map));

  SUBCASE("non-unit pixel rejected") {
    map.data[0] = 0.5f;
    map.data[1] = 0.0f;
    CHECK_THROWS_AS(validate(map), ValidationError);
  }
  SUBCASE("zero pixels allowed") {
    map.data[0] = map.data[1] = 0.0f;
    CHECK_NOTHROW(validate(map));
  }
  SUBCASE("round trip bytes") {
    const auto p1 = temp_file("map1.vfmp");
    const auto p2 = temp_file("map2.vfmp");
    save_feature_map(map, p1);
    save_feature_map(load_feature_map(p1), p2);
    CHECK(slurp(p1) == slurp(p2));
  }
  SUBCASE("payload shorter than header") {
    const auto path = temp_file("short.vfmp");
    save_feature_map(map, path);
    auto bytes = slurp(path);
    bytes.resize(bytes.size() - 4);
    std::ofstream(path, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_feature_map(path), FormatError);
  }
}

TEST_CASE("field: invariants and round trip") {
  GaussianFeatureField field;
  field.dim = 3;
  field.features = {1, 0, 0, 0, 0, 0};
  field.weights = {2.5f, 0.0f};
  CHECK_NOTHROW(validate(field));

  SUBCASE("W=0 with nonzero feature rejected") {
    field.weights[1] = 0.0f;
    field.features[3] = 1.0f;
    CHECK_THROWS_AS(validate(field), ValidationError);
  }
  SUBCASE("W>0 with zero feature rejected") {
    field.weights[1] = 1.0f;
    CHECK_THROWS_AS(validate(field), ValidationError);
  }
  SUBCASE("round trip bytes on a random field") {
    const CounterRng rng(9, 2);
    GaussianFeatureField f;
    f.dim = 8;
    for (size_t i = 0; i < 32; ++i) {
      Eigen::VectorXf v(8);
      for (int c = 0; c < 8; ++c)
        v[c] = static_cast<float>(rng.normal(i * 8 + c));
      v.normalize();
      for (int c = 0; c < 8; ++c) f.features.push_back(v[c]);
      f.weights.push_back(static_cast<float>(rng.uniform(i, 0.1, 5.0)));
    }
    const auto p1 = temp_file("field1.vgft");
    const auto p2 = temp_file("field2.vgft");
    save_field(f, p1);
    save_field(load_field(p1), p2);
    CHECK(slurp(p1) == slurp(p2));
  }
}

TEST_CASE("cameras: json round trip and validation") {
  Camera cam;
  cam.fx = cam.fy = 100;
  cam.cx = cam.cy = 32;
  cam.width = cam.height = 64;
  const auto path = temp_file("cams.json");
  save_cameras({cam}, path);
  const auto loaded = load_cameras(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].fx == 100);
  CHECK(loaded[0].world_to_camera == Eigen::Matrix4f::Identity());

  SUBCASE("save-load-save is byte identical") {
    const auto path2 = temp_file("cams2.json");
    save_cameras(load_cameras(path), path2);
    CHECK(slurp(path) == slurp(path2));
  }
  SUBCASE("non-orthonormal rotation rejected") {
    cam.world_to_camera(0, 0) = 2.0f;
    save_cameras({cam}, path);
    CHECK_THROWS_AS(load_cameras(path), ValidationError);
  }
}

TEST_CASE("point cloud round trip") {
  LabeledPointCloud cloud;
  cloud.points = {{0, 0, 0}, {1, 2, 3}};
  cloud.labels = {7, kUnlabeled};
  const auto p1 = temp_file("pc1.vlpc");
  const auto p2 = temp_file("pc2.vlpc");
  save_point_cloud(cloud, p1);
  save_point_cloud(load_point_cloud(p1), p2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_SUITE_END();
