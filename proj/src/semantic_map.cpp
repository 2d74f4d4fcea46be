#include "ovmm/semantic_map.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ovmm/io.hpp"
#include "ovmm/robot.hpp"

namespace ovmm {

void MapConfig::validate() const {
  if (size <= 0 || size % 2 != 0) throw Error("map size must be positive and even");
  if (categories < 0) throw Error("map category count must be nonnegative");
  if (!(obstacle_z_lo < obstacle_z_hi)) throw Error("obstacle band must satisfy z_lo < z_hi");
  if (!(cell_size > 0.0)) throw Error("map cell size must be positive");
}

SemanticMap::SemanticMap(MapConfig config) : config_(config) {
  config_.validate();
  const double half = 0.5 * config_.size * config_.cell_size;
  frame_ = {{-half, -half}, config_.cell_size};
  channels_.assign(static_cast<std::size_t>(channel_count()), BinaryGrid(config_.size, config_.size));
}

const BinaryGrid& SemanticMap::channel(int k) const {
  if (k < 0 || k >= channel_count()) {
    throw Error(fmt::format("map channel {} out of range [0, {})", k, channel_count()));
  }
  return channels_[static_cast<std::size_t>(k)];
}

BinaryGrid& SemanticMap::channel_mut(int k) {
  return const_cast<BinaryGrid&>(std::as_const(*this).channel(k));
}

SemanticMap SemanticMap::cropped(int r0, int c0, int r1, int c1) const {
  if (r0 < 0 || c0 < 0 || r1 >= rows() || c1 >= cols() || r1 < r0 || c1 < c0) {
    throw Error("crop window outside the map");
  }
  std::vector<BinaryGrid> out;
  out.reserve(channels_.size());
  for (const auto& ch : channels_) {
    BinaryGrid g(r1 - r0 + 1, c1 - c0 + 1);
    for (int r = r0; r <= r1; ++r) {
      std::copy_n(&ch(r, c0), g.cols(), &g(r - r0, 0));
    }
    out.push_back(std::move(g));
  }
  const GridFrame f{{frame_.origin.x + c0 * frame_.cell_size, frame_.origin.y + r0 * frame_.cell_size},
                    frame_.cell_size};
  return SemanticMap(config_, f, std::move(out));
}

void update_map(SemanticMap& map, const Observation& obs, const Pose2& pose,
                const CameraModel& camera, const std::vector<std::string>& channel_categories) {
  const MapConfig& cfg = map.config();
  const Cell here = map.cell_of(pose.position());
  if (!map.in_bounds(here)) {
    throw Error(fmt::format("pose ({:.2f}, {:.2f}) lies outside the {} x {} map", pose.x, pose.y,
                            cfg.size, cfg.size));
  }
  const Frame& f = obs.frame;
  if (f.width != camera.width || f.height != camera.height) {
    throw Error("observation size does not match the camera model");
  }

  // Channel index per instance id in this frame, -1 when unmapped.
  std::map<InstanceId, int> channel_of;
  for (const auto& [id, name] : obs.labels) {
    for (std::size_t c = 0; c < channel_categories.size() && c < static_cast<std::size_t>(cfg.categories); ++c) {
      if (channel_categories[c] == name) {
        channel_of[id] = static_cast<int>(c);
        break;
      }
    }
  }

  BinaryGrid& obstacles = map.channel_mut(map.obstacle_channel());
  BinaryGrid& explored = map.channel_mut(map.explored_channel());
  const RayGenerator rays(camera, camera_pose(pose, obs.joints, camera));
  const Vec2 eye = pose.position();
  const float no_return = static_cast<float>(camera.max_range);

  for (int u = 0; u < f.width; ++u) {
    double reach = 0.0;
    Vec2 farthest = eye;
    for (int v = 0; v < f.height; ++v) {
      const auto idx = static_cast<std::size_t>(v) * f.width + u;
      const float d = f.depth[idx];
      if (d == kInvalidDepth || d >= no_return) continue;
      const Vec3 p = rays.backproject(u, v, d);
      const Cell c = map.cell_of(p.xy());
      if (!map.in_bounds(c)) continue;
      if (p.z >= cfg.obstacle_z_lo && p.z <= cfg.obstacle_z_hi) obstacles[c] = 1;
      if (const InstanceId id = f.semantic[idx]; id != 0) {
        if (auto it = channel_of.find(id); it != channel_of.end()) map.channel_mut(it->second)[c] = 1;
      }
      const double r = (p.xy() - eye).norm();
      if (r <= cfg.explored_range) explored[c] = 1;
      if (r > reach) {
        reach = r;
        farthest = p.xy();
      }
    }
    if (reach <= 0.0) continue;
    const double len = std::min(reach, cfg.explored_range);
    const Vec2 dir = (1.0 / reach) * (farthest - eye);
    const int n = static_cast<int>(std::ceil(len / (0.5 * cfg.cell_size)));
    for (int i = 0; i <= n; ++i) {
      const Cell c = map.cell_of(eye + (len * i / n) * dir);
      if (map.in_bounds(c)) explored[c] = 1;
    }
  }

  BinaryGrid& current = map.channel_mut(map.current_channel());
  current.fill(0);
  current[here] = 1;
  map.channel_mut(map.past_channel())[here] = 1;
  explored[here] = 1;
}

void write_pgm(const BinaryGrid& grid, const std::filesystem::path& path) {
  std::string out = fmt::format("P5\n{} {}\n255\n", grid.cols(), grid.rows());
  for (int r = grid.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < grid.cols(); ++c) out.push_back(grid(r, c) ? '\xff' : '\0');
  }
  write_text_file(path, out);
}

void write_pgm(const Grid<double>& field, const std::filesystem::path& path) {
  double hi = 0.0;
  for (double v : field.raw()) {
    if (std::isfinite(v)) hi = std::max(hi, v);
  }
  std::string out = fmt::format("P5\n{} {}\n255\n", field.cols(), field.rows());
  for (int r = field.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < field.cols(); ++c) {
      const double v = field(r, c);
      const int g = !std::isfinite(v) ? 0 : hi > 0.0 ? 255 - static_cast<int>(200.0 * v / hi) : 255;
      out.push_back(static_cast<char>(g));
    }
  }
  write_text_file(path, out);
}

}  // namespace ovmm
