#include "fixtures.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ovmm::testing {

Scene make_room_scene(std::string id, double width, double depth,
                      const std::vector<ReceptacleSpecLite>& receptacles) {
  Scene s;
  s.id = std::move(id);
  s.bounds = {0.0, 0.0, width, depth};
  s.rooms.push_back({"room_0", s.bounds});
  const double t = 0.1;
  s.walls = {{{0, 0}, {width, 0}, t}, {{0, depth}, {width, depth}, t},
             {{0, 0}, {0, depth}, t}, {{width, 0}, {width, depth}, t}};
  for (std::size_t i = 0; i < receptacles.size(); ++i) {
    Receptacle r;
    r.id = fmt::format("rec_{}", i);
    r.category = receptacles[i].category;
    r.footprint = receptacles[i].footprint;
    r.surface_height = receptacles[i].height;
    r.surface = r.footprint.inflated(-0.02);
    r.room_id = "room_0";
    s.receptacles.push_back(r);
  }
  rasterize_occupancy(s);
  s.nav = build_nav_grid(s.occupancy, s.robot_radius, s.frame.cell_size);
  for (const auto& r : s.receptacles) s.viewpoints[r.id] = generate_viewpoints(s, r);
  for (const auto& name : receptacle_category_names()) {
    s.catalog.push_back({name, CategoryKind::Receptacle, CategorySplit::Seen});
  }
  for (const auto& c : default_object_catalog().categories) s.catalog.push_back(c);
  return s;
}

Episode make_episode(const Scene& scene, std::string id, const std::string& template_id,
                     const std::string& start_receptacle_id, const std::string& goal_receptacle_id,
                     Pose2 robot_start, Vec2 offset) {
  const Receptacle* start = scene.find_receptacle(start_receptacle_id);
  const Receptacle* goal = scene.find_receptacle(goal_receptacle_id);
  if (!start || !goal) throw Error("fixture refers to an unknown receptacle");
  const auto& templates = default_object_catalog().templates;
  const auto tmpl = std::find_if(templates.begin(), templates.end(),
                                 [&](const ObjectTemplate& t) { return t.id == template_id; });
  if (tmpl == templates.end()) throw Error("fixture refers to an unknown template");

  Episode e;
  e.id = std::move(id);
  e.scene_id = scene.id;
  e.split = Phase::Train;
  ObjectInstance o;
  o.id = "obj_0";
  o.template_id = tmpl->id;
  o.category = tmpl->category;
  o.radius = tmpl->radius;
  o.height = tmpl->height;
  const Vec2 c = start->surface.center() + offset;
  o.position = {c.x, c.y, start->surface_height};
  o.receptacle_id = start->id;
  e.objects.push_back(o);
  e.target_object_ids = {o.id};
  e.object_category = o.category;
  e.start_receptacle_category = start->category;
  e.goal_receptacle_category = goal->category;
  for (const auto& r : scene.receptacles) {
    if (r.category == start->category || r.category == goal->category) {
      e.viewpoints[r.id] = scene.viewpoints.at(r.id);
    }
  }
  e.robot_start = robot_start;
  e.requested_objects = 1;
  return e;
}

Dataset trivial_suite() {
  constexpr double kPi = std::numbers::pi;
  std::vector<Scene> scenes;
  std::vector<Episode> episodes;

  // Table ahead-left, counter ahead-right, robot facing both from the far wall.
  scenes.push_back(make_room_scene("trivial_a", 6.0, 5.0,
                                   {{"table", {1.0, 3.4, 2.2, 4.2}, 0.75},
                                    {"counter", {3.6, 3.6, 5.1, 4.2}, 0.9}}));
  episodes.push_back(make_episode(scenes.back(), "trivial_0", "cup_0", "rec_0", "rec_1",
                                  {2.5, 1.4, kPi / 2}));
  episodes.push_back(make_episode(scenes.back(), "trivial_1", "apple_1", "rec_1", "rec_0",
                                  {3.5, 1.5, kPi / 2}, {0.2, 0.0}));

  // Long room: receptacles on the same side, robot looking along the room.
  scenes.push_back(make_room_scene("trivial_b", 7.0, 4.0,
                                   {{"chest_of_drawers", {4.6, 2.9, 5.5, 3.4}, 0.85},
                                    {"bench", {2.0, 2.95, 3.2, 3.4}, 0.45}}));
  episodes.push_back(make_episode(scenes.back(), "trivial_2", "book_2", "rec_0", "rec_1",
                                  {1.2, 1.3, 0.5}));
  episodes.push_back(make_episode(scenes.back(), "trivial_3", "bowl_0", "rec_1", "rec_0",
                                  {5.8, 1.2, 2.4}));

  // Square room, receptacles in opposite corners of the far half.
  scenes.push_back(make_room_scene("trivial_c", 5.0, 5.0,
                                   {{"stand", {0.8, 3.7, 1.3, 4.15}, 0.6},
                                    {"table", {3.0, 3.4, 4.2, 4.2}, 0.75}}));
  episodes.push_back(make_episode(scenes.back(), "trivial_4", "mug_3", "rec_1", "rec_0",
                                  {2.5, 1.2, kPi / 2}));

  return make_dataset(std::move(scenes), std::move(episodes));
}

Dataset generated_suite(int count, std::uint64_t seed) {
  const auto& catalog = default_object_catalog();
  const auto splits = assign_splits(catalog.categories, catalog.templates, seed);
  std::vector<Scene> scenes;
  std::vector<Episode> episodes;
  for (int i = 0; i < count; ++i) {
    SceneGenParams params;
    params.rooms = 1;
    const std::uint64_t s = derive_seed(seed, fmt::format("scene/{}", i));
    scenes.push_back(generate_scene(s, params, fmt::format("suite_scene_{:03}", i)));
    episodes.push_back(generate_episode(scenes.back(), catalog, splits, Phase::Train,
                                        derive_seed(seed, fmt::format("episode/{}", i)),
                                        fmt::format("suite_{:03}", i)));
  }
  return make_dataset(std::move(scenes), std::move(episodes));
}

PointCloud box_cloud(std::uint64_t seed) {
  Rng rng(seed);
  const double step = 0.0025;
  const double w = rng.uniform(0.025, 0.06);
  const double d = rng.uniform(0.025, 0.07);
  const double h = rng.uniform(0.05, 0.15);
  const double x0 = rng.uniform(-0.02, 0.02);
  const double y0 = rng.uniform(-0.02, 0.02);
  const double table = 0.75;
  PointCloud cloud;
  // Table patch around the box.
  for (double x = x0 - 0.08; x <= x0 + w + 0.08; x += step * 2) {
    for (double y = y0 - 0.08; y <= y0 + d + 0.08; y += step * 2) {
      if (x >= x0 && x <= x0 + w && y >= y0 && y <= y0 + d) continue;
      cloud.points.push_back({x, y, table});
    }
  }
  for (double x = x0; x <= x0 + w + 1e-9; x += step) {
    for (double y = y0; y <= y0 + d + 1e-9; y += step) cloud.points.push_back({x, y, table + h});
  }
  for (double z = table; z < table + h; z += step * 2) {
    for (double x = x0; x <= x0 + w + 1e-9; x += step) {
      cloud.points.push_back({x, y0, z});
      cloud.points.push_back({x, y0 + d, z});
    }
    for (double y = y0; y <= y0 + d + 1e-9; y += step) {
      cloud.points.push_back({x0, y, z});
      cloud.points.push_back({x0 + w, y, z});
    }
  }
  return cloud;
}

PointCloud tabletop_cloud(std::uint64_t seed) {
  Rng rng(seed);
  const double w = rng.uniform(0.4, 1.4);
  const double d = rng.uniform(0.3, 0.8);
  const double z = rng.uniform(0.4, 1.0);
  const double step = rng.uniform(0.02, 0.03);
  PointCloud cloud;
  for (double x = 0.0; x <= w; x += step) {
    for (double y = 0.0; y <= d; y += step) {
      cloud.points.push_back({x + rng.uniform(-0.003, 0.003), y + rng.uniform(-0.003, 0.003),
                              z + rng.uniform(-0.004, 0.004)});
    }
  }
  const int clutter = static_cast<int>(rng.uniform_int(0, 4));
  for (int k = 0; k < clutter; ++k) {
    const double cx = rng.uniform(0.0, w);
    const double cy = rng.uniform(0.0, d);
    const double r = rng.uniform(0.03, 0.08);
    const double top = z + rng.uniform(0.05, 0.25);
    // Same lattice as the table: a depth sensor samples every surface about equally densely.
    for (double x = cx - r; x <= cx + r; x += step) {
      for (double y = cy - r; y <= cy + r; y += step) cloud.points.push_back({x, y, top});
    }
  }
  return cloud;
}

std::pair<std::vector<Category>, std::vector<ObjectTemplate>> table3_catalog(std::uint64_t seed) {
  std::vector<Category> cats;
  for (int i = 0; i < 129; ++i) {
    cats.push_back({fmt::format("category_{:03}", i), CategoryKind::Object, CategorySplit::Seen});
  }
  // Which categories end up seen depends only on names and seed.
  const SplitAssignment probe = assign_splits(cats, {}, seed);

  // For a seen category with n = 3k + r instances the floor rule keeps
  // 2k + [r == 2] seen and k + [r > 0] unseen. With K = sum k, a = #(r == 1)
  // and b = #(r == 2): seen = 2K + b, unseen = K + a + b. K = 662, a = 47,
  // b = 39 gives 1,363 and 748 over 86 categories.
  const std::size_t n_seen = probe.seen_categories.size();
  std::vector<int> seen_counts(n_seen);
  const int k_total = 662;
  const int a = 47;
  for (std::size_t i = 0; i < n_seen; ++i) {
    const int k = k_total / static_cast<int>(n_seen) +
                  (static_cast<int>(i) < k_total % static_cast<int>(n_seen) ? 1 : 0);
    seen_counts[i] = 3 * k + (static_cast<int>(i) < a ? 1 : 2);
  }
  const std::size_t n_unseen = probe.unseen_categories.size();
  std::vector<int> unseen_counts(n_unseen);
  for (std::size_t i = 0; i < n_unseen; ++i) {
    unseen_counts[i] = 424 / static_cast<int>(n_unseen) +
                       (static_cast<int>(i) < 424 % static_cast<int>(n_unseen) ? 1 : 0);
  }

  std::vector<ObjectTemplate> templates;
  auto emit = [&](const std::string& cat, int n) {
    for (int j = 0; j < n; ++j) templates.push_back({fmt::format("{}_{:03}", cat, j), cat, 0.03, 0.1});
  };
  std::size_t si = 0;
  for (const auto& c : probe.seen_categories) emit(c, seen_counts[si++]);
  std::size_t ui = 0;
  for (const auto& c : probe.unseen_categories) emit(c, unseen_counts[ui++]);
  return {cats, templates};
}

}  // namespace ovmm::testing
