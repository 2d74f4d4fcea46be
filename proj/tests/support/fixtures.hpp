#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ovmm/harness.hpp"
#include "ovmm/manipulation.hpp"
#include "ovmm/scene.hpp"

namespace ovmm::testing {

struct ReceptacleSpecLite {
  std::string category;
  Rect footprint;
  double height = 0.75;
};

/// Single walled room with the given receptacles; occupancy, nav grid and
/// viewpoints are derived the same way the generator does it.
Scene make_room_scene(std::string id, double width, double depth,
                      const std::vector<ReceptacleSpecLite>& receptacles);

/// Target of `template_id` at `offset` from the start receptacle's surface
/// center; goal viewpoints cover every receptacle of the goal category.
Episode make_episode(const Scene& scene, std::string id, const std::string& template_id,
                     const std::string& start_receptacle_id, const std::string& goal_receptacle_id,
                     Pose2 robot_start, Vec2 offset = {});

/// Five single-room episodes where the robot starts with both receptacles in
/// plain view and nothing in between.
Dataset trivial_suite();

/// Seeded single-room generated episodes (the degradation suite uses 50).
Dataset generated_suite(int count, std::uint64_t seed);

/// Top and sides of an axis-aligned box resting on a patch of table, sampled
/// on a regular lattice.
PointCloud box_cloud(std::uint64_t seed);

/// A table surface with a few raised clutter items and a little height noise.
PointCloud tabletop_cloud(std::uint64_t seed);

/// 129 object categories whose instance counts are fitted so that the floor
/// rules produce the 1,363 / 748 / 424 instance split under `seed`.
std::pair<std::vector<Category>, std::vector<ObjectTemplate>> table3_catalog(std::uint64_t seed);

}  // namespace ovmm::testing
