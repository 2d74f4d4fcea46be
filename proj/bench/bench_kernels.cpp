// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "ovmm/harness.hpp"
#include "ovmm/manipulation.hpp"
#include "ovmm/render.hpp"
#include "ovmm/robot.hpp"

using namespace ovmm;

namespace {

struct RenderSetup {
  Dataset data = testing::trivial_suite();
  std::vector<Box> boxes;
  CameraModel camera;
  CameraPose pose;

  RenderSetup() {
    const Episode& ep = data.episodes.front();
    const Scene& scene = data.scenes.at(ep.scene_id);
    boxes = build_world_boxes(scene, ep.objects);
    pose = camera_pose(ep.robot_start, Joints{}, camera);
  }
};

const RenderSetup& render_setup() {
  static const RenderSetup s;
  return s;
}

void BM_RenderParallel(benchmark::State& state) {
  const auto& s = render_setup();
  for (auto _ : state) benchmark::DoNotOptimize(render_frame(s.boxes, s.camera, s.pose));
}

void BM_RenderSerial(benchmark::State& state) {
  const auto& s = render_setup();
  for (auto _ : state) benchmark::DoNotOptimize(render_frame_serial(s.boxes, s.camera, s.pose));
}

void BM_GraspParallel(benchmark::State& state) {
  const PointCloud cloud = testing::box_cloud(3);
  for (auto _ : state) benchmark::DoNotOptimize(score_grasps(cloud));
}

void BM_GraspSerial(benchmark::State& state) {
  const PointCloud cloud = testing::box_cloud(3);
  for (auto _ : state) benchmark::DoNotOptimize(score_grasps_serial(cloud));
}

void BM_PlacementParallel(benchmark::State& state) {
  const PointCloud cloud = testing::tabletop_cloud(5);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_placement_point(cloud, 1));
}

void BM_PlacementSerial(benchmark::State& state) {
  const PointCloud cloud = testing::tabletop_cloud(5);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_placement_point_serial(cloud, 1));
}

void BM_Batch(benchmark::State& state) {
  const Dataset data = testing::trivial_suite();
  RunConfig cfg;
  cfg.parallelism = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_batch(cfg, data));
}

}  // namespace

BENCHMARK(BM_RenderParallel);
BENCHMARK(BM_RenderSerial);
BENCHMARK(BM_GraspParallel);
BENCHMARK(BM_GraspSerial);
BENCHMARK(BM_PlacementParallel);
BENCHMARK(BM_PlacementSerial);
BENCHMARK(BM_Batch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
