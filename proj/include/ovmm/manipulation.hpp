#pragma once

#include <cstdint>
#include <vector>

#include "ovmm/grid.hpp"
#include "ovmm/robot.hpp"

namespace ovmm {

struct PointCloud {
  std::vector<Vec3> points;
  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

struct GripperGeometry {
  double finger_width = 0.01;
  double max_aperture = 0.08;
  double finger_depth = 0.02;
  void validate() const;
};

struct GraspParams {
  double voxel = 0.005;
  double top_fraction = 0.10;
  double threshold = 0.4;
};

struct GraspCandidate {
  Cell voxel;        // (iy, ix) in voxel units
  Vec3 position;     // voxel center at the top of the kept layer
  double yaw = 0.0;  // 0 closes the fingers along x, pi/2 along y
  double score = 0.0;
  friend bool operator==(const GraspCandidate&, const GraspCandidate&) = default;
};

/// Top-down grasp heuristic over a voxelized cloud. Candidates at or above
/// the threshold, best first; ties prefer candidates nearer the centroid of
/// the projected top layer. Candidate scoring runs on OpenMP threads.
std::vector<GraspCandidate> score_grasps(const PointCloud& cloud,
                                         const GripperGeometry& gripper = {},
                                         const GraspParams& params = {});
std::vector<GraspCandidate> score_grasps_serial(const PointCloud& cloud,
                                                const GripperGeometry& gripper = {},
                                                const GraspParams& params = {});

struct PlacementParams {
  int samples = 50;
  double radius_xy = 0.10;
  double height_tolerance = 0.03;
};

struct PlacementEstimate {
  Vec3 point;
  std::size_t index = 0;  // into the cloud
  int neighbors = 0;
};

/// Number of cloud points within radius_xy horizontally and height_tolerance
/// vertically of point i (including i itself).
int placement_neighbors(const PointCloud& cloud, std::size_t i, const PlacementParams& params);

/// Best of `samples` seeded random cloud points by neighbor count; the first
/// sampled wins ties. Samples are drawn without replacement when the cloud is
/// large enough.
PlacementEstimate estimate_placement_point(const PointCloud& cloud, std::uint64_t seed,
                                           const PlacementParams& params = {});
PlacementEstimate estimate_placement_point_serial(const PointCloud& cloud, std::uint64_t seed,
                                                  const PlacementParams& params = {});

/// Joint targets that put the gripper `clearance` above a world point while
/// in manipulation mode. The base moves along its heading (perpendicular to
/// the arm) to line the arm up with the point.
struct ArmReach {
  double lift = 0.0;
  double extension = 0.0;
  double base_forward = 0.0;
};
ArmReach solve_arm_reach(const Pose2& base, const Vec3& point, double clearance,
                         const JointLimits& limits = {});

}  // namespace ovmm
