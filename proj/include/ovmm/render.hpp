#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ovmm/camera.hpp"
#include "ovmm/scene.hpp"

namespace ovmm {

using InstanceId = std::uint16_t;

inline constexpr float kInvalidDepth = 0.0f;

/// Vertical prism of the 2.5-D world: footprint rectangle extruded over [z0, z1].
struct Box {
  Rect xy;
  double z0 = 0.0;
  double z1 = 0.0;
  InstanceId instance = 0;  // 0 = unlabeled geometry (walls)
};

/// Instance numbering shared by renderer, simulator and wire protocol:
/// receptacle i is i + 1, object j is receptacle_count + 1 + j.
struct InstanceTable {
  std::size_t receptacle_count = 0;
  std::size_t object_count = 0;

  InstanceId receptacle(std::size_t i) const { return static_cast<InstanceId>(i + 1); }
  InstanceId object(std::size_t j) const {
    return static_cast<InstanceId>(receptacle_count + 1 + j);
  }
  bool is_object(InstanceId id) const { return id > receptacle_count && id <= receptacle_count + object_count; }
  bool is_receptacle(InstanceId id) const { return id >= 1 && id <= receptacle_count; }
  std::size_t object_index(InstanceId id) const { return id - receptacle_count - 1; }
  std::size_t receptacle_index(InstanceId id) const { return id - 1u; }
};

/// Boxes for walls, receptacles and every object not currently held.
std::vector<Box> build_world_boxes(const Scene& scene, std::span<const ObjectInstance> objects);

/// Depth (optical-axis meters; rays without a return read max_range) and
/// instance labels, row-major. kInvalidDepth marks unusable pixels.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  std::vector<InstanceId> semantic;

  std::size_t count(InstanceId id) const;
  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Ray casts every pixel against the boxes and the floor plane. Rows are
/// distributed over OpenMP threads.
Frame render_frame(std::span<const Box> boxes, const CameraModel& camera, const CameraPose& pose);

/// Single-threaded reference for render_frame; results are bitwise identical.
Frame render_frame_serial(std::span<const Box> boxes, const CameraModel& camera,
                          const CameraPose& pose);

struct PerceptionNoiseProfile {
  double dropout_prob = 0.0;
  double misclassify_prob = 0.0;

  static PerceptionNoiseProfile ground_truth() { return {0.0, 0.0}; }
  static PerceptionNoiseProfile noisy() { return {0.5, 0.2}; }
  bool is_ground_truth() const { return dropout_prob == 0.0 && misclassify_prob == 0.0; }
  void validate() const;
};

using LabelMap = std::map<InstanceId, std::string>;

/// Applies per-frame, per-instance noise to a ground-truth labelling. Each
/// visible instance is dropped (pixels become background) with dropout_prob;
/// otherwise its category is replaced by a different one of the same kind
/// with misclassify_prob. `labels` holds the categories reported to the agent.
void apply_perception_noise(Frame& frame, LabelMap& labels, const PerceptionNoiseProfile& noise,
                            std::span<const std::string> object_vocabulary,
                            std::span<const std::string> receptacle_vocabulary,
                            const InstanceTable& table, Rng& rng);

}  // namespace ovmm
