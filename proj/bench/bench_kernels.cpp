// Serial reference vs OpenMP kernel comparison. Run with
//   ./build/bench/bench_kernels --benchmark_counters_tabular=true
#include "glift/labeling.hpp"
#include "glift/pipeline.hpp"
#include "glift/reference.hpp"
#include "glift/rng.hpp"

#include <benchmark/benchmark.h>

using namespace glift;

namespace {

GaussianScene bench_scene(size_t n) {
  const CounterRng rng(7, 401);
  GaussianScene scene;
  for (size_t i = 0; i < n; ++i) {
    Gaussian g;
    g.mean = {static_cast<float>(rng.uniform(i * 16 + 0, -1.5, 1.5)),
              static_cast<float>(rng.uniform(i * 16 + 1, -1.5, 1.5)),
              static_cast<float>(rng.uniform(i * 16 + 2, 0.5, 6.0))};
    for (int k = 0; k < 3; ++k)
      g.scale[k] = static_cast<float>(rng.uniform(i * 16 + 3 + k, 0.02, 0.3));
    Eigen::Vector4f q;
    for (int k = 0; k < 4; ++k)
      q[k] = static_cast<float>(rng.uniform(i * 16 + 6 + k, -1, 1));
    g.rotation = Eigen::Quaternionf(q[0], q[1], q[2], q[3]).normalized();
    g.opacity = static_cast<float>(rng.uniform(i * 16 + 10, 0.1, 1.0));
    scene.gaussians.push_back(g);
  }
  return scene;
}

Camera bench_camera(uint32_t size) {
  Camera cam;
  cam.fx = cam.fy = static_cast<float>(size);
  cam.cx = cam.cy = 0.5f * static_cast<float>(size);
  cam.width = cam.height = size;
  return cam;
}

LabeledPointCloud bench_cloud(const GaussianScene& scene, size_t q) {
  const CounterRng rng(8, 402);
  LabeledPointCloud cloud;
  for (size_t k = 0; k < q; ++k) {
    const size_t host = rng.word(k * 8) % scene.size();
    Eigen::Vector3f p = scene.gaussians[host].mean;
    for (int c = 0; c < 3; ++c)
      p[c] += static_cast<float>(rng.normal(k * 8 + 1 + c)) *
              scene.gaussians[host].scale[c];
    cloud.points.push_back(p);
    cloud.labels.push_back(static_cast<uint32_t>(host % 8));
  }
  return cloud;
}

BinaryMask bench_mask(uint32_t size) {
  const CounterRng rng(9, 403);
  BinaryMask mask;
  mask.height = mask.width = size;
  mask.bits.assign(static_cast<size_t>(size) * size, 0);
  for (size_t i = 0; i < mask.bits.size(); ++i)
    mask.bits[i] = rng.uniform(i) < 0.4;
  return mask;
}

void BM_per_pixel_weights(benchmark::State& state) {
  const GaussianScene scene = bench_scene(state.range(0));
  const Camera cam = bench_camera(128);
  for (auto _ : state)
    benchmark::DoNotOptimize(per_pixel_weights(scene, cam));
}

void BM_per_pixel_weights_serial(benchmark::State& state) {
  const GaussianScene scene = bench_scene(state.range(0));
  const Camera cam = bench_camera(128);
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::per_pixel_weights(scene, cam));
}

void BM_assign_labels(benchmark::State& state) {
  const GaussianScene scene = bench_scene(state.range(0));
  const LabeledPointCloud cloud = bench_cloud(scene, 8 * state.range(0));
  const LabelConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(assign_labels(scene, cloud, cfg));
}

void BM_assign_labels_brute(benchmark::State& state) {
  const GaussianScene scene = bench_scene(state.range(0));
  const LabeledPointCloud cloud = bench_cloud(scene, 8 * state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::assign_labels(scene, cloud));
}

void BM_dilate(benchmark::State& state) {
  const BinaryMask mask = bench_mask(256);
  for (auto _ : state)
    benchmark::DoNotOptimize(dilate(mask, state.range(0)));
}

void BM_dilate_sweep(benchmark::State& state) {
  const BinaryMask mask = bench_mask(256);
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::dilate(mask, state.range(0)));
}

void BM_lift_cosine_median(benchmark::State& state) {
  OcclusionSceneSpec spec;
  spec.front_count = 256;
  spec.back_count = 256;
  spec.ring_count = static_cast<uint32_t>(state.range(0));
  spec.ring_spread = 0.7;
  const OcclusionScene occ = make_occlusion_scene(spec);
  PipelineConfig cfg;
  cfg.gate.q = 0.5;
  const MapProvider provider = [&](uint32_t v) { return occ.maps[v]; };
  for (auto _ : state)
    benchmark::DoNotOptimize(lift(occ.scene, occ.cameras, provider, cfg));
}

}  // namespace

BENCHMARK(BM_per_pixel_weights)->Arg(200)->Arg(1000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_per_pixel_weights_serial)->Arg(200)->Arg(1000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assign_labels)->Arg(500)->Arg(2000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assign_labels_brute)->Arg(500)->Arg(2000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dilate)->Arg(5)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dilate_sweep)->Arg(5)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lift_cosine_median)->Arg(8)->Arg(32)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
