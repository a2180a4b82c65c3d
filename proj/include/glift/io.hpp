#pragma once

#include "glift/types.hpp"

#include <filesystem>

namespace glift {

// Binary formats are little-endian with a 4-byte magic and a u32 version.
// Save followed by load reproduces the file byte for byte.

GaussianScene load_scene(const std::filesystem::path& path);
void save_scene(const GaussianScene& scene, const std::filesystem::path& path);

std::vector<Camera> load_cameras(const std::filesystem::path& path);
void save_cameras(const std::vector<Camera>& cams,
                  const std::filesystem::path& path);

FeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const FeatureMap& map,
                      const std::filesystem::path& path);

GaussianFeatureField load_field(const std::filesystem::path& path);
void save_field(const GaussianFeatureField& field,
                const std::filesystem::path& path);

LabeledPointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const LabeledPointCloud& cloud,
                      const std::filesystem::path& path);

}  // namespace glift
