#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ovmm/common.hpp"
#include "ovmm/grid.hpp"

namespace ovmm {

enum class CategoryKind { Object, Receptacle };
enum class CategorySplit { Seen, Unseen };
enum class InstanceSplit { Seen, Unseen };
enum class Support { OnReceptacle, Held, OnFloor };

/// Episode split. Training draws seen instances of seen categories; the two
/// validation splits draw unseen instances of seen or unseen categories.
enum class Phase { Train, ValSeenCategory, ValUnseenCategory };

std::string to_string(Phase p);
Phase phase_from_string(std::string_view s);

struct Category {
  std::string name;
  CategoryKind kind = CategoryKind::Object;
  CategorySplit split = CategorySplit::Seen;
  friend bool operator==(const Category&, const Category&) = default;
};

/// One object model in the catalog (a dataset "instance").
struct ObjectTemplate {
  std::string id;
  std::string category;
  double radius = 0.05;
  double height = 0.1;
  friend bool operator==(const ObjectTemplate&, const ObjectTemplate&) = default;
};

struct ObjectCatalog {
  std::vector<Category> categories;
  std::vector<ObjectTemplate> templates;
};

/// Household object vocabulary used by the generators: 24 categories with
/// 5 templates each. Sizes are a deterministic function of the template id.
const ObjectCatalog& default_object_catalog();

/// The 21 receptacle categories.
std::span<const std::string> receptacle_category_names();

/// An object placed in the world.
struct ObjectInstance {
  std::string id;
  std::string template_id;
  std::string category;
  double radius = 0.05;
  double height = 0.1;
  Vec3 position;  // base center; z is the supporting surface height
  double yaw = 0.0;
  Support support = Support::OnReceptacle;
  std::string receptacle_id;  // set iff support == OnReceptacle
  InstanceSplit instance_split = InstanceSplit::Seen;
  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct Receptacle {
  std::string id;
  std::string category;
  Rect footprint;
  double surface_height = 0.75;
  Rect surface;  // placeable region, inside footprint
  std::string room_id;
  friend bool operator==(const Receptacle&, const Receptacle&) = default;
};

struct Room {
  std::string id;
  Rect bounds;
  friend bool operator==(const Room&, const Room&) = default;
};

/// Axis-aligned wall segment of given thickness, full height.
struct WallSegment {
  Vec2 a;
  Vec2 b;
  double thickness = 0.1;
  Rect box() const;
  friend bool operator==(const WallSegment&, const WallSegment&) = default;
};

struct Viewpoint {
  Vec2 position;
  std::string receptacle_id;
  friend bool operator==(const Viewpoint&, const Viewpoint&) = default;
};

inline constexpr double kWallHeight = 2.5;
inline constexpr double kMinPlaceableArea = 0.04;

struct Scene {
  std::string id;
  std::uint64_t seed = 0;
  Rect bounds;
  std::vector<Room> rooms;
  std::vector<WallSegment> walls;
  std::vector<Receptacle> receptacles;
  std::vector<Category> catalog;
  GridFrame frame;
  BinaryGrid occupancy;  // 1 = blocked
  BinaryGrid nav;        // 1 = navigable for the robot center
  double robot_radius = 0.25;
  std::map<std::string, std::vector<Viewpoint>> viewpoints;

  const Receptacle* find_receptacle(std::string_view id) const;
  bool navigable(Vec2 p) const;
  friend bool operator==(const Scene&, const Scene&) = default;
};

struct SceneGenParams {
  int rooms = 1;
  double width = 6.0;
  double depth = 6.0;
  int receptacles = 3;
  double robot_radius = 0.25;
  int max_retries = 50;
  /// Minimum distance between a receptacle and walls or other receptacles.
  double clearance = 0.6;
};

Scene generate_scene(std::uint64_t seed, const SceneGenParams& params, std::string id = {});

/// Rasterizes walls, receptacles and the outside of the apartment into `scene.occupancy`.
void rasterize_occupancy(Scene& scene);

/// Obstacles dilated by ceil(robot_radius / cell_size) cells (Chebyshev), free
/// remainder reduced to its largest 4-connected component.
BinaryGrid build_nav_grid(const BinaryGrid& occupancy, double robot_radius,
                          double cell_size = kCellSize);

struct ViewpointParams {
  double spacing = 0.125;
  double min_distance = 0.3;
  double max_distance = 1.5;
};

std::vector<Viewpoint> generate_viewpoints(const Scene& scene, const Receptacle& receptacle,
                                           const ViewpointParams& params = {});

struct SplitAssignment {
  std::set<std::string> seen_categories;
  std::set<std::string> unseen_categories;
  std::set<std::string> seen_instances;    // template ids
  std::set<std::string> unseen_instances;  // template ids

  bool instance_seen(const ObjectTemplate& t) const { return seen_instances.contains(t.id); }
  std::vector<ObjectTemplate> pool(Phase phase, std::span<const ObjectTemplate> templates) const;
};

/// floor(2/3 |categories|) object categories become seen; within each seen
/// category floor(2/3 |instances|) templates become seen. Receptacle
/// categories in the input are ignored (always seen).
SplitAssignment assign_splits(std::span<const Category> catalog,
                              std::span<const ObjectTemplate> templates, std::uint64_t seed);

struct PlacementResult {
  std::vector<ObjectInstance> objects;
  int requested = 0;
  int achieved = 0;
  bool warning = false;  // fewer objects than requested could be placed
};

/// Object count bounds for a total surface area A: [round(1.5 A), round(2 A)], at least 1.
std::pair<int, int> object_count_range(double total_surface_area);

/// Samples collision-free object placements on receptacles that have viewpoints.
/// Objects in `fixed` are kept, count toward the total, and constrain collisions.
PlacementResult sample_object_placements(const Scene& scene,
                                         std::span<const ObjectTemplate> pool,
                                         std::uint64_t seed,
                                         std::span<const ObjectInstance> fixed = {});

/// Tries to place one object on a receptacle; nullopt if no free spot was found.
std::optional<ObjectInstance> try_place_on(const Receptacle& rec, const ObjectTemplate& tmpl,
                                           std::span<const ObjectInstance> existing, Rng& rng,
                                           int attempts = 50);

struct Episode {
  std::string id;
  std::string scene_id;
  std::uint64_t seed = 0;
  Phase split = Phase::Train;
  std::vector<ObjectInstance> objects;
  std::vector<std::string> target_object_ids;
  std::string object_category;
  std::string start_receptacle_category;
  std::string goal_receptacle_category;
  Pose2 robot_start;
  std::map<std::string, std::vector<Viewpoint>> viewpoints;
  int requested_objects = 0;
  bool placement_warning = false;

  const ObjectInstance* find_object(std::string_view id) const;
  bool is_target(std::string_view object_id) const;
  friend bool operator==(const Episode&, const Episode&) = default;
};

inline constexpr double kMinSpawnGeodesic = 3.0;

Episode generate_episode(const Scene& scene, const ObjectCatalog& catalog,
                         const SplitAssignment& splits, Phase phase, std::uint64_t seed,
                         std::string id = {});

}  // namespace ovmm
