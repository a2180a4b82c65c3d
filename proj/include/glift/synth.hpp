#pragma once

#include "glift/aggregate.hpp"
#include "glift/types.hpp"

#include <filesystem>

namespace glift {

// Two parallel Gaussian walls viewed from an arc of cameras. Frontal cameras
// see the front wall occlude the back wall's center; wide-angle cameras see
// the back wall directly. Each feature map carries the GT feature of
// whichever wall dominates the pixel, or zero.
struct OcclusionSceneSpec {
  double front_depth = 2.0;  // along +z, from the arc pivot plane
  double back_depth = 4.0;
  double front_extent = 1.0;  // half-extent of the square wall
  double back_extent = 2.2;
  uint32_t front_count = 256;  // Gaussians per plane (squares work best)
  uint32_t back_count = 256;
  double front_opacity = 0.95;
  double back_opacity = 0.9;
  uint32_t feature_dim = 16;
  Eigen::VectorXf front_feature;  // unit; defaults to e0 / e1 when empty
  Eigen::VectorXf back_feature;
  uint32_t ring_count = 12;
  double ring_spread = 1.0;  // camera arc half-width, in tangent units
  double ring_radius = 0.0;  // 0 = auto (back_depth)
  uint32_t image_size = 64;
  double focal = 0.0;  // 0 = auto (frames the back wall)
  uint64_t seed = 1;

  void validate() const;
};

struct OcclusionScene {
  GaussianScene scene;
  std::vector<Camera> cameras;
  std::vector<FeatureMap> maps;           // one per camera
  std::vector<uint8_t> wall;              // 0 = front, 1 = back
  Eigen::VectorXf front_feature, back_feature;
};

OcclusionScene make_occlusion_scene(const OcclusionSceneSpec& spec);

OcclusionSceneSpec load_occlusion_spec(const std::filesystem::path& path);
void save_occlusion_scene(const OcclusionScene& occ,
                          const std::filesystem::path& out_dir);

// Synthetic observation stream for the aggregators: inliers are the GT
// direction plus Gaussian tangent noise; outliers sit near the antipode
// (one shared drifted direction per stream, modeling a coherent occluder
// semantic) or at independent random directions.
struct StreamSpec {
  uint32_t dim = 512;
  Eigen::VectorXf direction;   // unit; empty = random from seed
  double noise = 0.1;          // angular std of the tangent noise, radians
  double outlier_fraction = 0.2;
  enum class Placement { Antipodal, Random } placement = Placement::Antipodal;
  // Where corrupted views sit in the stream: one contiguous run (an occluded
  // arc), independent random positions, or evenly interleaved with a clean
  // first view (periodic occlusion across the sweep).
  enum class Arrangement {
    Block,
    Scattered,
    Interleaved
  } arrangement = Arrangement::Block;
  uint32_t count = 100;
  double weight_min = 1.0, weight_max = 1.0;
  // Occlusion-consistent outlier model: the corrupted views all see one
  // coherent wrong semantic (the antipode drifted by outlier_drift radians),
  // and their visibility weights are suppressed by outlier_weight_scale
  // because transmittance is low behind the occluder.
  double outlier_drift = 0.5;
  double outlier_weight_scale = 0.3;
  uint64_t seed = 1;

  void validate() const;
};

struct FeatureStream {
  std::vector<FeatureObservation> observations;  // ascending view index
  Eigen::VectorXf direction;                     // ground truth
  std::vector<uint8_t> is_outlier;
};

FeatureStream make_feature_stream(const StreamSpec& spec);

StreamSpec load_stream_spec(const std::filesystem::path& path);

// "VSTR" files: dim f32 feature, f32 weight, u32 view index per observation.
void save_stream(std::span<const FeatureObservation> obs, uint32_t dim,
                 const std::filesystem::path& path);
std::vector<FeatureObservation> load_stream(const std::filesystem::path& path);

}  // namespace glift
