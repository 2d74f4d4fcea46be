#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ovmm/camera.hpp"
#include "ovmm/grid.hpp"
#include "ovmm/sim.hpp"

namespace ovmm {

struct MapConfig {
  int size = 480;
  int categories = 3;
  double cell_size = kCellSize;
  double obstacle_z_lo = 0.1;
  double obstacle_z_hi = 1.5;
  double explored_range = 5.0;

  void validate() const;
};

/// K = C + 4 binary channels over an M x M grid whose center cell holds the
/// start pose. Map x points along the start heading, y to its left; rows
/// grow with y.
class SemanticMap {
 public:
  explicit SemanticMap(MapConfig config = {});

  const MapConfig& config() const { return config_; }
  int channel_count() const { return config_.categories + 4; }
  int obstacle_channel() const { return config_.categories; }
  int explored_channel() const { return config_.categories + 1; }
  int current_channel() const { return config_.categories + 2; }
  int past_channel() const { return config_.categories + 3; }

  /// Read-only view of one channel; throws on a bad index.
  const BinaryGrid& channel(int k) const;
  BinaryGrid& channel_mut(int k);

  const GridFrame& frame() const { return frame_; }
  Cell cell_of(Vec2 p) const { return frame_.to_cell(p); }
  Vec2 center_of(Cell c) const { return frame_.center(c); }
  bool in_bounds(Cell c) const { return channels_[0].in_bounds(c); }
  int rows() const { return channels_[0].rows(); }
  int cols() const { return channels_[0].cols(); }

  /// Copy of the rows/cols in [r0, r1] x [c0, c1] with a shifted frame, so
  /// planning can run on the region that holds information.
  SemanticMap cropped(int r0, int c0, int r1, int c1) const;

  friend bool operator==(const SemanticMap&, const SemanticMap&) = default;

 private:
  SemanticMap(MapConfig config, GridFrame frame, std::vector<BinaryGrid> channels)
      : config_(config), frame_(frame), channels_(std::move(channels)) {}

  MapConfig config_;
  GridFrame frame_;
  std::vector<BinaryGrid> channels_;
};

/// Integrates one observation taken at `pose` (map frame). Pixels whose
/// label equals `channel_categories[c]` mark category channel c.
void update_map(SemanticMap& map, const Observation& obs, const Pose2& pose,
                const CameraModel& camera, const std::vector<std::string>& channel_categories);

/// Alias of SemanticMap::channel kept for the operation-level API.
inline const BinaryGrid& query_channel(const SemanticMap& map, int channel) {
  return map.channel(channel);
}

/// Binary grid as an 8-bit PGM (set = 255), row 0 at the bottom of the image.
void write_pgm(const BinaryGrid& grid, const std::filesystem::path& path);
void write_pgm(const Grid<double>& field, const std::filesystem::path& path);

}  // namespace ovmm
