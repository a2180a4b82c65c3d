#include "glift/io.hpp"

#include "binary_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace glift {

using detail::Reader;
using detail::Writer;
using nlohmann::json;

namespace {

constexpr char kSceneMagic[4] = {'V', 'G', 'S', 'C'};
constexpr char kMapMagic[4] = {'V', 'F', 'M', 'P'};
constexpr char kFieldMagic[4] = {'V', 'G', 'F', 'T'};
constexpr char kCloudMagic[4] = {'V', 'L', 'P', 'C'};

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

GaussianScene load_scene(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kSceneMagic);
  r.expect_version(1);
  const size_t n = detail::checked_count(r.u64(), 44, "scene");
  GaussianScene scene;
  scene.gaussians.resize(n);
  for (size_t i = 0; i < n; ++i) {
    Gaussian& g = scene.gaussians[i];
    for (int k = 0; k < 3; ++k) g.mean[k] = r.f32();
    for (int k = 0; k < 3; ++k) g.scale[k] = r.f32();
    const float w = r.f32(), x = r.f32(), y = r.f32(), z = r.f32();
    g.rotation = Eigen::Quaternionf(w, x, y, z);
    g.opacity = r.f32();

    const float qn = g.rotation.norm();
    if (!std::isfinite(qn) || std::abs(qn - 1.0f) > 1e-3f) {
      std::ostringstream err;
      err << "gaussian " << i << ": quaternion norm " << qn
          << " too far from unit";
      throw ValidationError(err.str());
    }
    // Renormalize only beyond float noise so that save/load round-trips of
    // valid files stay byte-identical.
    if (std::abs(qn - 1.0f) > 1e-6f) g.rotation.normalize();
    validate(g, i);
  }
  r.expect_eof();
  return scene;
}

void save_scene(const GaussianScene& scene, const std::filesystem::path& path) {
  validate(scene);
  Writer w(path);
  w.magic(kSceneMagic);
  w.u32(1);
  w.u64(scene.size());
  for (const Gaussian& g : scene.gaussians) {
    for (int k = 0; k < 3; ++k) w.f32(g.mean[k]);
    for (int k = 0; k < 3; ++k) w.f32(g.scale[k]);
    w.f32(g.rotation.w());
    w.f32(g.rotation.x());
    w.f32(g.rotation.y());
    w.f32(g.rotation.z());
    w.f32(g.opacity);
  }
  w.close();
}

std::vector<Camera> load_cameras(const std::filesystem::path& path) {
  const json j = load_json(path);
  if (!j.is_array()) throw FormatError(path.string() + ": expected an array");
  std::vector<Camera> cams;
  cams.reserve(j.size());
  try {
    for (const json& e : j) {
      Camera c;
      c.fx = e.at("fx").get<float>();
      c.fy = e.at("fy").get<float>();
      c.cx = e.at("cx").get<float>();
      c.cy = e.at("cy").get<float>();
      c.width = e.at("width").get<uint32_t>();
      c.height = e.at("height").get<uint32_t>();
      const auto m = e.at("world_to_camera").get<std::vector<double>>();
      if (m.size() != 16)
        throw FormatError("world_to_camera must hold 16 numbers");
      for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 4; ++col)
          c.world_to_camera(row, col) = static_cast<float>(m[row * 4 + col]);
      validate(c, cams.size());
      cams.push_back(c);
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return cams;
}

void save_cameras(const std::vector<Camera>& cams,
                  const std::filesystem::path& path) {
  json j = json::array();
  for (const Camera& c : cams) {
    std::vector<double> m(16);
    for (int row = 0; row < 4; ++row)
      for (int col = 0; col < 4; ++col)
        m[row * 4 + col] = c.world_to_camera(row, col);
    j.push_back({{"fx", c.fx},
                 {"fy", c.fy},
                 {"cx", c.cx},
                 {"cy", c.cy},
                 {"width", c.width},
                 {"height", c.height},
                 {"world_to_camera", m}});
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kMapMagic);
  r.expect_version(1);
  FeatureMap map;
  map.height = r.u32();
  map.width = r.u32();
  map.dim = r.u32();
  const size_t n = detail::checked_count(
      static_cast<uint64_t>(map.height) * map.width * map.dim, 4,
      "feature map");
  map.data.resize(n);
  r.bytes(map.data.data(), n * sizeof(float));
  r.expect_eof();
  validate(map);
  return map;
}

void save_feature_map(const FeatureMap& map,
                      const std::filesystem::path& path) {
  validate(map);
  Writer w(path);
  w.magic(kMapMagic);
  w.u32(1);
  w.u32(map.height);
  w.u32(map.width);
  w.u32(map.dim);
  w.bytes(map.data.data(), map.data.size() * sizeof(float));
  w.close();
}

GaussianFeatureField load_field(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kFieldMagic);
  r.expect_version(1);
  GaussianFeatureField field;
  const size_t n = detail::checked_count(r.u64(), 4, "field");
  field.dim = r.u32();
  field.features.resize(n * field.dim);
  field.weights.resize(n);
  for (size_t i = 0; i < n; ++i) {
    r.bytes(field.feature(i), field.dim * sizeof(float));
    field.weights[i] = r.f32();
  }
  r.expect_eof();
  validate(field);
  return field;
}

void save_field(const GaussianFeatureField& field,
                const std::filesystem::path& path) {
  validate(field);
  Writer w(path);
  w.magic(kFieldMagic);
  w.u32(1);
  w.u64(field.count());
  w.u32(field.dim);
  for (size_t i = 0; i < field.count(); ++i) {
    w.bytes(field.feature(i), field.dim * sizeof(float));
    w.f32(field.weights[i]);
  }
  w.close();
}

LabeledPointCloud load_point_cloud(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kCloudMagic);
  r.expect_version(1);
  const size_t n = detail::checked_count(r.u64(), 16, "point cloud");
  LabeledPointCloud cloud;
  cloud.points.resize(n);
  cloud.labels.resize(n);
  for (size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) cloud.points[i][k] = r.f32();
    cloud.labels[i] = r.u32();
  }
  r.expect_eof();
  validate(cloud);
  return cloud;
}

void save_point_cloud(const LabeledPointCloud& cloud,
                      const std::filesystem::path& path) {
  validate(cloud);
  Writer w(path);
  w.magic(kCloudMagic);
  w.u32(1);
  w.u64(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) w.f32(cloud.points[i][k]);
    w.u32(cloud.labels[i]);
  }
  w.close();
}

}  // namespace glift
