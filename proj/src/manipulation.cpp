#include "ovmm/manipulation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace ovmm {
namespace {

struct Voxel {
  std::int64_t x;
  std::int64_t y;
  std::int64_t z;
  friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

struct Regions {
  int center_half_width;  // |u| <= this
  int finger_inner;       // fingers cover inner <= |u| <= outer
  int finger_outer;
  int half_depth;         // |v| <= this
};

Regions regions_for(const GripperGeometry& g, double voxel) {
  Regions r;
  r.center_half_width = static_cast<int>(std::lround(0.5 * g.finger_width / voxel));
  r.finger_inner = static_cast<int>(std::lround(0.5 * g.max_aperture / voxel));
  r.finger_outer = r.finger_inner + std::max(1, static_cast<int>(std::lround(g.finger_width / voxel))) - 1;
  r.half_depth = static_cast<int>(std::lround(0.5 * g.finger_depth / voxel));
  return r;
}

struct Projection {
  Grid<std::uint8_t> occupied;
  Grid<std::int64_t> top;  // highest kept z voxel per column
  std::int64_t x0 = 0;     // voxel coordinate of column 0
  std::int64_t y0 = 0;
  std::vector<Cell> cells;  // occupied, row-major
};

Projection project_top_layer(const PointCloud& cloud, const GraspParams& params, int pad) {
  std::vector<Voxel> voxels;
  voxels.reserve(cloud.size());
  for (const Vec3& p : cloud.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw Error("point cloud contains a non-finite coordinate");
    }
    voxels.push_back({static_cast<std::int64_t>(std::floor(p.x / params.voxel)),
                      static_cast<std::int64_t>(std::floor(p.y / params.voxel)),
                      static_cast<std::int64_t>(std::floor(p.z / params.voxel))});
  }
  std::sort(voxels.begin(), voxels.end());
  voxels.erase(std::unique(voxels.begin(), voxels.end()), voxels.end());

  std::vector<std::int64_t> zs;
  zs.reserve(voxels.size());
  for (const auto& v : voxels) zs.push_back(v.z);
  std::sort(zs.begin(), zs.end());
  // Nearest-rank percentile.
  const double q = 1.0 - params.top_fraction;
  const auto rank = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(zs.size()) - 1e-9)));
  const std::int64_t z_cut = zs[std::min(rank, zs.size()) - 1];

  std::int64_t xmin = INT64_MAX, xmax = INT64_MIN, ymin = INT64_MAX, ymax = INT64_MIN;
  for (const auto& v : voxels) {
    if (v.z < z_cut) continue;
    xmin = std::min(xmin, v.x);
    xmax = std::max(xmax, v.x);
    ymin = std::min(ymin, v.y);
    ymax = std::max(ymax, v.y);
  }
  Projection proj;
  proj.x0 = xmin - pad;
  proj.y0 = ymin - pad;
  const int cols = static_cast<int>(xmax - xmin) + 1 + 2 * pad;
  const int rows = static_cast<int>(ymax - ymin) + 1 + 2 * pad;
  proj.occupied = Grid<std::uint8_t>(rows, cols, 0);
  proj.top = Grid<std::int64_t>(rows, cols, INT64_MIN);
  for (const auto& v : voxels) {
    if (v.z < z_cut) continue;
    const int r = static_cast<int>(v.y - proj.y0);
    const int c = static_cast<int>(v.x - proj.x0);
    proj.occupied(r, c) = 1;
    proj.top(r, c) = std::max(proj.top(r, c), v.z);
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (proj.occupied(r, c)) proj.cells.push_back({r, c});
    }
  }
  return proj;
}

double raw_score(const Projection& proj, Cell at, int bin, const Regions& g) {
  auto occ = [&](int u, int v) {
    const int r = bin == 0 ? at.row + v : at.row + u;
    const int c = bin == 0 ? at.col + u : at.col + v;
    return proj.occupied.in_bounds(r, c) && proj.occupied(r, c);
  };
  int center = 0, center_n = 0, finger = 0, finger_n = 0;
  for (int v = -g.half_depth; v <= g.half_depth; ++v) {
    for (int u = -g.center_half_width; u <= g.center_half_width; ++u) {
      center += occ(u, v);
      ++center_n;
    }
    for (int u = g.finger_inner; u <= g.finger_outer; ++u) {
      finger += occ(u, v) + occ(-u, v);
      finger_n += 2;
    }
  }
  const double occupancy = static_cast<double>(center) / center_n;
  const double emptiness = 1.0 - static_cast<double>(finger) / finger_n;
  return occupancy * emptiness;
}

std::vector<GraspCandidate> score_grasps_impl(const PointCloud& cloud,
                                              const GripperGeometry& gripper,
                                              const GraspParams& params, bool parallel) {
  if (cloud.empty()) throw Error("cannot score grasps on an empty point cloud");
  gripper.validate();
  const Regions g = regions_for(gripper, params.voxel);
  const Projection proj = project_top_layer(cloud, params, g.finger_outer + g.half_depth + 2);
  const auto n = static_cast<std::int64_t>(proj.cells.size());

  std::vector<double> raw(static_cast<std::size_t>(2 * n));
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    for (int bin = 0; bin < 2; ++bin) raw[2 * i + bin] = raw_score(proj, proj.cells[i], bin, g);
  }
  Grid<double> lookup[2] = {Grid<double>(proj.occupied.rows(), proj.occupied.cols(), 0.0),
                            Grid<double>(proj.occupied.rows(), proj.occupied.cols(), 0.0)};
  for (std::int64_t i = 0; i < n; ++i) {
    for (int bin = 0; bin < 2; ++bin) lookup[bin][proj.cells[i]] = raw[2 * i + bin];
  }

  double cy = 0.0, cx = 0.0;
  for (const Cell& c : proj.cells) {
    cy += c.row;
    cx += c.col;
  }
  cy /= static_cast<double>(n);
  cx /= static_cast<double>(n);

  std::vector<double> smoothed(raw.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    const Cell c = proj.cells[i];
    for (int bin = 0; bin < 2; ++bin) {
      const Grid<double>& s = lookup[bin];
      const double mean = 0.25 * (s(c.row - 1, c.col) + s(c.row + 1, c.col) + s(c.row, c.col - 1) +
                                  s(c.row, c.col + 1));
      smoothed[2 * i + bin] = raw[2 * i + bin] * mean;
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < smoothed.size(); ++k) {
    if (smoothed[k] >= params.threshold) order.push_back(k);
  }
  auto dist2 = [&](std::size_t k) {
    const Cell c = proj.cells[k / 2];
    return (c.row - cy) * (c.row - cy) + (c.col - cx) * (c.col - cx);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tuple(-smoothed[a], dist2(a), a) < std::tuple(-smoothed[b], dist2(b), b);
  });

  std::vector<GraspCandidate> out;
  out.reserve(order.size());
  for (std::size_t k : order) {
    const Cell c = proj.cells[k / 2];
    const std::int64_t vx = proj.x0 + c.col;
    const std::int64_t vy = proj.y0 + c.row;
    GraspCandidate cand;
    cand.voxel = {static_cast<int>(vy), static_cast<int>(vx)};
    cand.position = {(static_cast<double>(vx) + 0.5) * params.voxel,
                     (static_cast<double>(vy) + 0.5) * params.voxel,
                     (static_cast<double>(proj.top[c]) + 1.0) * params.voxel};
    cand.yaw = (k % 2 == 0) ? 0.0 : std::numbers::pi / 2;
    cand.score = smoothed[k];
    out.push_back(cand);
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::uint64_t seed, int samples) {
  Rng rng(seed);
  std::vector<std::size_t> picks;
  const auto k = static_cast<std::size_t>(samples);
  if (n >= k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                              static_cast<std::int64_t>(n) - 1));
      std::swap(idx[i], idx[j]);
      picks.push_back(idx[i]);
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      picks.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
    }
  }
  return picks;
}

PlacementEstimate estimate_impl(const PointCloud& cloud, std::uint64_t seed,
                                const PlacementParams& params, bool parallel) {
  if (cloud.empty()) throw Error("cannot estimate a placement point on an empty point cloud");
  if (params.samples < 1) throw Error("placement sampling needs at least one sample");
  const auto picks = sample_indices(cloud.size(), seed, params.samples);
  std::vector<int> counts(picks.size());
  const auto m = static_cast<std::int64_t>(picks.size());
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (std::int64_t i = 0; i < m; ++i) counts[i] = placement_neighbors(cloud, picks[i], params);
  std::size_t best = 0;
  for (std::size_t i = 1; i < picks.size(); ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return {cloud.points[picks[best]], picks[best], counts[best]};
}

}  // namespace

void GripperGeometry::validate() const {
  if (!(finger_width > 0.0 && max_aperture > 0.0 && finger_depth > 0.0)) {
    throw Error("gripper dimensions must be positive");
  }
  if (!(max_aperture > 2.0 * finger_width)) throw Error("gripper aperture must exceed two finger widths");
}

std::vector<GraspCandidate> score_grasps(const PointCloud& cloud, const GripperGeometry& gripper,
                                         const GraspParams& params) {
  return score_grasps_impl(cloud, gripper, params, true);
}

std::vector<GraspCandidate> score_grasps_serial(const PointCloud& cloud,
                                                const GripperGeometry& gripper,
                                                const GraspParams& params) {
  return score_grasps_impl(cloud, gripper, params, false);
}

int placement_neighbors(const PointCloud& cloud, std::size_t i, const PlacementParams& params) {
  const Vec3& p = cloud.points[i];
  const double r2 = params.radius_xy * params.radius_xy;
  int count = 0;
  for (const Vec3& q : cloud.points) {
    const double dx = q.x - p.x;
    const double dy = q.y - p.y;
    if (dx * dx + dy * dy <= r2 && std::abs(q.z - p.z) <= params.height_tolerance) ++count;
  }
  return count;
}

PlacementEstimate estimate_placement_point(const PointCloud& cloud, std::uint64_t seed,
                                           const PlacementParams& params) {
  return estimate_impl(cloud, seed, params, true);
}

PlacementEstimate estimate_placement_point_serial(const PointCloud& cloud, std::uint64_t seed,
                                                  const PlacementParams& params) {
  return estimate_impl(cloud, seed, params, false);
}

ArmReach solve_arm_reach(const Pose2& base, const Vec3& point, double clearance,
                         const JointLimits& limits) {
  const double c = std::cos(base.yaw);
  const double s = std::sin(base.yaw);
  const double dx = point.x - base.x;
  const double dy = point.y - base.y;
  ArmReach reach;
  reach.base_forward = c * dx + s * dy;
  reach.extension = (s * dx - c * dy) - kArmBaseOffset;
  reach.lift = point.z + clearance;
  if (reach.lift > limits.lift_max || reach.lift < limits.lift_min) {
    throw Error(fmt::format("out of workspace: lift {:.3f} m outside [{:.2f}, {:.2f}]", reach.lift,
                            limits.lift_min, limits.lift_max));
  }
  if (reach.extension > limits.extension_max || reach.extension < limits.extension_min) {
    throw Error(fmt::format("out of workspace: extension {:.3f} m outside [{:.2f}, {:.2f}]",
                            reach.extension, limits.extension_min, limits.extension_max));
  }
  return reach;
}

}  // namespace ovmm
