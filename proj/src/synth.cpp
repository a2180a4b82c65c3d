#include "glift/synth.hpp"

#include "binary_io.hpp"
#include "glift/io.hpp"
#include "glift/rng.hpp"
#include "glift/splat.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace glift {

using nlohmann::json;

namespace {

// rng stream ids
enum : uint64_t {
  kStreamJitter = 1,
  kStreamDirection = 2,
  kStreamNoise = 3,
  kStreamWeight = 4,
  kStreamPlacement = 5,
  kStreamOutlierDir = 6,
};

Eigen::VectorXf default_axis_feature(uint32_t dim, uint32_t axis) {
  Eigen::VectorXf f = Eigen::VectorXf::Zero(dim);
  f[axis] = 1.0f;
  return f;
}

// Unit vector from Irwin-Hall normals; only adds, multiplies and one sqrt.
Eigen::VectorXd random_unit(const CounterRng& rng, uint64_t base,
                            uint32_t dim) {
  Eigen::VectorXd v(dim);
  for (uint32_t c = 0; c < dim; ++c) v[c] = rng.normal(base + c);
  double n2 = 0;
  for (uint32_t c = 0; c < dim; ++c) n2 += v[c] * v[c];
  const double n = std::sqrt(n2);
  for (uint32_t c = 0; c < dim; ++c) v[c] /= n;
  return v;
}

// center + sigma * (tangent projection of a normal draw), renormalized.
Eigen::VectorXd perturb_on_sphere(const CounterRng& rng, uint64_t base,
                                  const Eigen::VectorXd& center,
                                  double sigma) {
  const uint32_t dim = static_cast<uint32_t>(center.size());
  if (sigma == 0.0) return center;
  Eigen::VectorXd g(dim);
  for (uint32_t c = 0; c < dim; ++c) g[c] = rng.normal(base + c);
  double proj = 0;
  for (uint32_t c = 0; c < dim; ++c) proj += g[c] * center[c];
  const double per_comp = sigma / std::sqrt(static_cast<double>(dim - 1));
  Eigen::VectorXd v(dim);
  double n2 = 0;
  for (uint32_t c = 0; c < dim; ++c) {
    v[c] = center[c] + per_comp * (g[c] - proj * center[c]);
    n2 += v[c] * v[c];
  }
  const double n = std::sqrt(n2);
  for (uint32_t c = 0; c < dim; ++c) v[c] /= n;
  return v;
}

Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
               double fx, uint32_t size) {
  Eigen::Vector3d forward = target - eye;
  forward /= std::sqrt(forward.squaredNorm());
  const Eigen::Vector3d world_up(0, 1, 0);
  Eigen::Vector3d right = world_up.cross(forward);
  right /= std::sqrt(right.squaredNorm());
  const Eigen::Vector3d down = forward.cross(right);

  Camera cam;
  cam.fx = cam.fy = static_cast<float>(fx);
  cam.cx = cam.cy = 0.5f * static_cast<float>(size - 1);
  cam.width = cam.height = size;
  Eigen::Matrix3d R;
  R.row(0) = right;
  R.row(1) = down;
  R.row(2) = forward;
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = R.cast<float>();
  cam.world_to_camera.topRightCorner<3, 1>() = (-R * eye).cast<float>();
  return cam;
}

void add_wall(GaussianScene& scene, std::vector<uint8_t>& wall_of,
              const CounterRng& jitter, uint64_t key_base, double depth,
              double extent, uint32_t count, double opacity, uint8_t wall_id) {
  const uint32_t side =
      static_cast<uint32_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const double spacing = side > 1 ? 2.0 * extent / (side - 1) : extent;
  // dense overlap keeps the wall solid: at cell corners the accumulated
  // alpha still approaches the plane opacity
  const double sigma_xy = 0.75 * spacing;
  const double sigma_z = 0.05 * spacing;
  for (uint32_t k = 0; k < count; ++k) {
    const uint32_t gx = k % side, gy = k / side;
    const double jx = jitter.uniform(key_base + 2 * k, -0.05, 0.05) * spacing;
    const double jy =
        jitter.uniform(key_base + 2 * k + 1, -0.05, 0.05) * spacing;
    Gaussian g;
    g.mean = Eigen::Vector3f(
        static_cast<float>(-extent + gx * spacing + jx),
        static_cast<float>(side > 1 ? -extent + gy * spacing + jy : jy),
        static_cast<float>(depth));
    g.scale = Eigen::Vector3f(static_cast<float>(sigma_xy),
                              static_cast<float>(sigma_xy),
                              static_cast<float>(sigma_z));
    g.rotation = Eigen::Quaternionf::Identity();
    g.opacity = static_cast<float>(opacity);
    scene.gaussians.push_back(g);
    wall_of.push_back(wall_id);
  }
}

}  // namespace

void OcclusionSceneSpec::validate() const {
  if (!(back_depth > front_depth) || !(front_depth > kNearPlane))
    throw ConfigError("need back_depth > front_depth > near plane");
  if (!(front_extent > 0) || !(back_extent > 0))
    throw ConfigError("wall extents must be positive");
  if (front_count == 0) throw ConfigError("front wall needs gaussians");
  if (!(front_opacity > 0) || front_opacity > 1 || !(back_opacity > 0) ||
      back_opacity > 1)
    throw ConfigError("opacities must lie in (0,1]");
  if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (ring_count == 0) throw ConfigError("ring_count must be >= 1");
  if (image_size < 8) throw ConfigError("image_size must be >= 8");
  auto check_feature = [&](const Eigen::VectorXf& f, const char* name) {
    if (f.size() == 0) return;
    if (static_cast<uint32_t>(f.size()) != feature_dim)
      throw ConfigError(std::string(name) + " feature dimension mismatch");
    if (std::abs(f.norm() - 1.0f) > 1e-4f)
      throw ConfigError(std::string(name) + " feature must be unit");
  };
  check_feature(front_feature, "front");
  check_feature(back_feature, "back");
}

OcclusionScene make_occlusion_scene(const OcclusionSceneSpec& spec) {
  spec.validate();
  OcclusionScene occ;
  occ.front_feature = spec.front_feature.size()
                          ? spec.front_feature
                          : default_axis_feature(spec.feature_dim, 0);
  occ.back_feature = spec.back_feature.size()
                         ? spec.back_feature
                         : default_axis_feature(spec.feature_dim, 1);

  const CounterRng jitter(spec.seed, kStreamJitter);
  add_wall(occ.scene, occ.wall, jitter, 0, spec.front_depth,
           spec.front_extent, spec.front_count, spec.front_opacity, 0);
  add_wall(occ.scene, occ.wall, jitter, 2ull * spec.front_count,
           spec.back_depth, spec.back_extent, spec.back_count,
           spec.back_opacity, 1);

  const Eigen::Vector3d pivot(0, 0, spec.back_depth);
  const double radius =
      spec.ring_radius > 0 ? spec.ring_radius : spec.back_depth;
  const double focal =
      spec.focal > 0
          ? spec.focal
          : 0.45 * spec.image_size * radius / spec.back_extent;

  for (uint32_t k = 0; k < spec.ring_count; ++k) {
    const double t =
        spec.ring_count > 1
            ? 2.0 * static_cast<double>(k) / (spec.ring_count - 1) - 1.0
            : 0.0;
    const double s = spec.ring_spread * t;  // lateral offset, tangent units
    Eigen::Vector3d dir(s, 0, -1.0);
    dir /= std::sqrt(dir.squaredNorm());
    const Eigen::Vector3d eye = pivot + radius * dir;
    occ.cameras.push_back(look_at(eye, pivot, focal, spec.image_size));
  }

  // Feature maps: the dominant wall's GT feature per pixel, else zero.
  occ.maps.resize(occ.cameras.size());
  for (size_t c = 0; c < occ.cameras.size(); ++c) {
    const WeightMap wm = per_pixel_weights(occ.scene, occ.cameras[c]);
    FeatureMap& map = occ.maps[c];
    map.height = wm.height;
    map.width = wm.width;
    map.dim = spec.feature_dim;
    map.data.assign(
        static_cast<size_t>(wm.height) * wm.width * spec.feature_dim, 0.0f);
    for (size_t px = 0; px < wm.pixels.size(); ++px) {
      double front_sum = 0, back_sum = 0;
      for (const WeightMap::Entry& e : wm.pixels[px]) {
        if (occ.wall[e.index] == 0)
          front_sum += e.weight;
        else
          back_sum += e.weight;
      }
      const Eigen::VectorXf* feature = nullptr;
      if (front_sum >= 0.5)
        feature = &occ.front_feature;
      else if (back_sum >= 0.5)
        feature = &occ.back_feature;
      if (feature) {
        float* out = map.data.data() + px * spec.feature_dim;
        for (uint32_t d = 0; d < spec.feature_dim; ++d) out[d] = (*feature)[d];
      }
    }
  }
  return occ;
}

void StreamSpec::validate() const {
  if (dim < 2) throw ConfigError("stream dim must be >= 2");
  if (direction.size() &&
      static_cast<uint32_t>(direction.size()) != dim)
    throw ConfigError("stream direction dimension mismatch");
  if (!(noise >= 0)) throw ConfigError("noise must be non-negative");
  if (!(outlier_fraction >= 0) || outlier_fraction >= 1.0)
    throw ConfigError("outlier_fraction must lie in [0,1)");
  if (count == 0) throw ConfigError("stream count must be >= 1");
  if (!(weight_min > 0) || weight_max < weight_min)
    throw ConfigError("need 0 < weight_min <= weight_max");
  if (!(outlier_weight_scale > 0))
    throw ConfigError("outlier_weight_scale must be positive");
  if (!(outlier_drift >= 0))
    throw ConfigError("outlier_drift must be non-negative");
}

FeatureStream make_feature_stream(const StreamSpec& spec) {
  spec.validate();
  FeatureStream out;

  const CounterRng dir_rng(spec.seed, kStreamDirection);
  Eigen::VectorXd gt;
  if (spec.direction.size()) {
    gt = spec.direction.cast<double>();
    gt /= std::sqrt(gt.squaredNorm());
  } else {
    gt = random_unit(dir_rng, 0, spec.dim);
  }
  out.direction = gt.cast<float>();

  const uint32_t n_outliers = static_cast<uint32_t>(
      std::floor(spec.outlier_fraction * spec.count + 0.5));
  out.is_outlier.assign(spec.count, 0);
  const CounterRng place_rng(spec.seed, kStreamPlacement);
  if (n_outliers > 0) {
    switch (spec.arrangement) {
      case StreamSpec::Arrangement::Block: {
        // contiguous run of corrupted views, like an occluded camera arc
        const uint32_t span = spec.count - n_outliers;
        const uint32_t start = static_cast<uint32_t>(
            std::floor(place_rng.uniform(0) * (span + 1)));
        for (uint32_t i = 0; i < n_outliers; ++i)
          out.is_outlier[start + i] = 1;
        break;
      }
      case StreamSpec::Arrangement::Scattered: {
        // the n_outliers smallest priorities become outliers
        std::vector<std::pair<double, uint32_t>> prio(spec.count);
        for (uint32_t i = 0; i < spec.count; ++i)
          prio[i] = {place_rng.uniform(1 + i), i};
        std::sort(prio.begin(), prio.end());
        for (uint32_t i = 0; i < n_outliers; ++i)
          out.is_outlier[prio[i].second] = 1;
        break;
      }
      case StreamSpec::Arrangement::Interleaved: {
        // fixed periodic positions, last slot of each period
        const uint32_t period = spec.count / n_outliers;
        for (uint32_t i = 0; i < n_outliers; ++i)
          out.is_outlier[std::min(spec.count - 1, (i + 1) * period - 1)] = 1;
        break;
      }
    }
  }

  // One drifted near-antipodal direction per stream: corrupted views all see
  // the same wrong semantic, they do not scatter independently.
  const CounterRng outdir_rng(spec.seed, kStreamOutlierDir);
  Eigen::VectorXd outlier_center;
  if (spec.placement == StreamSpec::Placement::Antipodal)
    outlier_center =
        perturb_on_sphere(outdir_rng, 0, (-gt).eval(), spec.outlier_drift);

  const CounterRng noise_rng(spec.seed, kStreamNoise);
  const CounterRng weight_rng(spec.seed, kStreamWeight);
  out.observations.resize(spec.count);
  for (uint32_t i = 0; i < spec.count; ++i) {
    const uint64_t base = static_cast<uint64_t>(i) * spec.dim;
    Eigen::VectorXd f;
    if (!out.is_outlier[i]) {
      f = perturb_on_sphere(noise_rng, base, gt, spec.noise);
    } else if (spec.placement == StreamSpec::Placement::Antipodal) {
      f = perturb_on_sphere(noise_rng, base, outlier_center, spec.noise);
    } else {
      f = random_unit(noise_rng, base, spec.dim);
    }
    FeatureObservation& obs = out.observations[i];
    obs.feature = f.cast<float>();
    obs.weight = weight_rng.uniform(i, spec.weight_min, spec.weight_max);
    if (out.is_outlier[i]) obs.weight *= spec.outlier_weight_scale;
    obs.view_index = static_cast<int32_t>(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Specs from JSON, scene serialization

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j;
}

Eigen::VectorXf feature_from_json(const json& j) {
  const auto v = j.get<std::vector<float>>();
  return Eigen::Map<const Eigen::VectorXf>(v.data(),
                                           static_cast<long>(v.size()));
}

}  // namespace

OcclusionSceneSpec load_occlusion_spec(const std::filesystem::path& path) {
  const json j = read_json(path);
  OcclusionSceneSpec s;
  try {
    if (j.contains("front_depth")) s.front_depth = j["front_depth"];
    if (j.contains("back_depth")) s.back_depth = j["back_depth"];
    if (j.contains("front_extent")) s.front_extent = j["front_extent"];
    if (j.contains("back_extent")) s.back_extent = j["back_extent"];
    if (j.contains("front_count")) s.front_count = j["front_count"];
    if (j.contains("back_count")) s.back_count = j["back_count"];
    if (j.contains("front_opacity")) s.front_opacity = j["front_opacity"];
    if (j.contains("back_opacity")) s.back_opacity = j["back_opacity"];
    if (j.contains("feature_dim")) s.feature_dim = j["feature_dim"];
    if (j.contains("front_feature"))
      s.front_feature = feature_from_json(j["front_feature"]);
    if (j.contains("back_feature"))
      s.back_feature = feature_from_json(j["back_feature"]);
    if (j.contains("ring_count")) s.ring_count = j["ring_count"];
    if (j.contains("ring_spread")) s.ring_spread = j["ring_spread"];
    if (j.contains("ring_radius")) s.ring_radius = j["ring_radius"];
    if (j.contains("image_size")) s.image_size = j["image_size"];
    if (j.contains("focal")) s.focal = j["focal"];
    if (j.contains("seed")) s.seed = j["seed"];
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

StreamSpec load_stream_spec(const std::filesystem::path& path) {
  const json j = read_json(path);
  StreamSpec s;
  try {
    if (j.contains("dim")) s.dim = j["dim"];
    if (j.contains("direction")) s.direction = feature_from_json(j["direction"]);
    if (j.contains("noise")) s.noise = j["noise"];
    if (j.contains("outlier_fraction")) s.outlier_fraction = j["outlier_fraction"];
    if (j.contains("placement")) {
      const std::string p = j["placement"];
      if (p == "antipodal")
        s.placement = StreamSpec::Placement::Antipodal;
      else if (p == "random")
        s.placement = StreamSpec::Placement::Random;
      else
        throw ConfigError("placement must be 'antipodal' or 'random'");
    }
    if (j.contains("arrangement")) {
      const std::string a = j["arrangement"];
      if (a == "block")
        s.arrangement = StreamSpec::Arrangement::Block;
      else if (a == "scattered")
        s.arrangement = StreamSpec::Arrangement::Scattered;
      else
        throw ConfigError("arrangement must be 'block' or 'scattered'");
    }
    if (j.contains("count")) s.count = j["count"];
    if (j.contains("weight_min")) s.weight_min = j["weight_min"];
    if (j.contains("weight_max")) s.weight_max = j["weight_max"];
    if (j.contains("seed")) s.seed = j["seed"];
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

void save_occlusion_scene(const OcclusionScene& occ,
                          const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "maps");
  save_scene(occ.scene, out_dir / "scene.vgsc");
  save_cameras(occ.cameras, out_dir / "cameras.json");
  for (size_t i = 0; i < occ.maps.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.vfmp", i);
    save_feature_map(occ.maps[i], out_dir / "maps" / name);
  }
  {
    json j;
    j["dim"] = occ.front_feature.size();
    j["queries"] = json::array();
    auto vec = [](const Eigen::VectorXf& v) {
      return std::vector<float>(v.data(), v.data() + v.size());
    };
    j["queries"].push_back({{"name", "front"}, {"vec", vec(occ.front_feature)}});
    j["queries"].push_back({{"name", "back"}, {"vec", vec(occ.back_feature)}});
    std::ofstream out(out_dir / "queries.json");
    out << j.dump(2) << '\n';
  }
  // wall membership doubles as semantic ground truth
  detail::Writer w(out_dir / "walls.vglb");
  const char magic[4] = {'V', 'G', 'L', 'B'};
  w.magic(magic);
  w.u32(1);
  w.u64(occ.wall.size());
  for (size_t i = 0; i < occ.wall.size(); ++i) {
    w.u32(occ.wall[i]);
    w.f32(1.0f);
    w.f32(1.0f);
  }
  w.close();
}

namespace {
constexpr char kStreamMagic[4] = {'V', 'S', 'T', 'R'};
}

void save_stream(std::span<const FeatureObservation> obs, uint32_t dim,
                 const std::filesystem::path& path) {
  detail::Writer w(path);
  w.magic(kStreamMagic);
  w.u32(1);
  w.u64(obs.size());
  w.u32(dim);
  for (const FeatureObservation& o : obs) {
    if (static_cast<uint32_t>(o.feature.size()) != dim)
      throw ValidationError("stream observation dimension mismatch");
    w.bytes(o.feature.data(), dim * sizeof(float));
    w.f32(static_cast<float>(o.weight));
    w.u32(static_cast<uint32_t>(o.view_index));
  }
  w.close();
}

std::vector<FeatureObservation> load_stream(
    const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic(kStreamMagic);
  r.expect_version(1);
  const size_t n = detail::checked_count(r.u64(), 8, "stream");
  const uint32_t dim = r.u32();
  std::vector<FeatureObservation> obs(n);
  for (size_t i = 0; i < n; ++i) {
    obs[i].feature.resize(dim);
    r.bytes(obs[i].feature.data(), dim * sizeof(float));
    obs[i].weight = r.f32();
    obs[i].view_index = static_cast<int32_t>(r.u32());
  }
  r.expect_eof();
  return obs;
}

}  // namespace glift
