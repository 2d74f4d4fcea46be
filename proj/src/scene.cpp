#include "ovmm/scene.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace ovmm {
namespace {

struct ReceptacleSpec {
  const char* name;
  double width;
  double depth;
  double height;
};

// Nominal footprints are kept at most 0.9 m deep so every surface point is
// within arm reach of some side.
constexpr std::array<ReceptacleSpec, 21> kReceptacleSpecs{{
    {"bathtub", 1.5, 0.7, 0.55},
    {"bed", 1.9, 0.9, 0.55},
    {"bench", 1.2, 0.45, 0.45},
    {"cabinet", 0.8, 0.5, 0.9},
    {"chair", 0.5, 0.5, 0.45},
    {"chest_of_drawers", 0.9, 0.5, 0.85},
    {"couch", 1.8, 0.85, 0.45},
    {"counter", 1.5, 0.6, 0.9},
    {"filing_cabinet", 0.5, 0.6, 0.75},
    {"hamper", 0.5, 0.4, 0.6},
    {"serving_cart", 0.7, 0.45, 0.8},
    {"shelves", 0.9, 0.4, 1.0},
    {"shoe_rack", 0.8, 0.35, 0.4},
    {"sink", 0.6, 0.5, 0.85},
    {"stand", 0.5, 0.45, 0.6},
    {"stool", 0.4, 0.4, 0.5},
    {"table", 1.2, 0.8, 0.75},
    {"toilet", 0.45, 0.65, 0.45},
    {"trunk", 0.9, 0.5, 0.5},
    {"wardrobe", 1.0, 0.6, 1.0},
    {"washer_dryer", 0.6, 0.6, 0.9},
}};

constexpr std::array<const char*, 24> kObjectCategories{
    "action_figure", "apple",   "bowl",       "book",       "box",        "candle",
    "cup",           "dumbbell", "hat",       "jug",        "lamp",       "laptop",
    "mug",           "pen",     "plant_pot",  "plate",      "shoe",       "soap_dispenser",
    "spray_bottle",  "stuffed_toy", "teapot", "tin_can",    "toy_truck",  "vase"};

constexpr int kTemplatesPerCategory = 5;
constexpr double kWallThickness = 0.1;
constexpr double kMinRoomSide = 3.0;
constexpr double kDoorWidth = 1.0;
constexpr double kGridMargin = 0.5;
constexpr double kSurfaceInset = 0.02;

ObjectCatalog make_default_catalog() {
  ObjectCatalog cat;
  for (const char* name : kObjectCategories) {
    cat.categories.push_back({name, CategoryKind::Object, CategorySplit::Seen});
    for (int i = 0; i < kTemplatesPerCategory; ++i) {
      ObjectTemplate t;
      t.id = fmt::format("{}_{}", name, i);
      t.category = name;
      Rng rng(fnv1a(t.id));
      t.radius = 0.02 + 0.015 * rng.uniform();
      t.height = 0.06 + 0.14 * rng.uniform();
      cat.templates.push_back(std::move(t));
    }
  }
  return cat;
}

const ReceptacleSpec& spec_for(std::string_view name) {
  for (const auto& s : kReceptacleSpecs) {
    if (name == s.name) return s;
  }
  throw Error(fmt::format("unknown receptacle category '{}'", name));
}

// Splits the apartment rectangle into `count` rooms by repeatedly halving the
// largest room along its longer side. Returns empty on failure.
struct Layout {
  std::vector<Rect> rooms;
  std::vector<WallSegment> walls;
};

std::optional<Layout> make_layout(const Rect& bounds, int count, Rng& rng) {
  Layout out;
  out.rooms.push_back(bounds);
  const double t = kWallThickness;
  out.walls.push_back({{bounds.x0, bounds.y0}, {bounds.x1, bounds.y0}, t});
  out.walls.push_back({{bounds.x0, bounds.y1}, {bounds.x1, bounds.y1}, t});
  out.walls.push_back({{bounds.x0, bounds.y0}, {bounds.x0, bounds.y1}, t});
  out.walls.push_back({{bounds.x1, bounds.y0}, {bounds.x1, bounds.y1}, t});

  while (static_cast<int>(out.rooms.size()) < count) {
    std::vector<std::size_t> order(out.rooms.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.rooms[a].area() > out.rooms[b].area();
    });
    bool split = false;
    for (std::size_t idx : order) {
      const Rect r = out.rooms[idx];
      const bool vertical = r.width() >= r.depth();
      const double len = vertical ? r.width() : r.depth();
      if (len < 2.0 * kMinRoomSide) continue;
      const double lo = kMinRoomSide / len;
      const double f = rng.uniform(std::max(0.4, lo), std::min(0.6, 1.0 - lo));
      Rect a = r;
      Rect b = r;
      if (vertical) {
        const double x = r.x0 + f * len;
        a.x1 = x;
        b.x0 = x;
        const double door = rng.uniform(r.y0 + 0.4, r.y1 - 0.4 - kDoorWidth);
        out.walls.push_back({{x, r.y0}, {x, door}, t});
        out.walls.push_back({{x, door + kDoorWidth}, {x, r.y1}, t});
      } else {
        const double y = r.y0 + f * len;
        a.y1 = y;
        b.y0 = y;
        const double door = rng.uniform(r.x0 + 0.4, r.x1 - 0.4 - kDoorWidth);
        out.walls.push_back({{r.x0, y}, {door, y}, t});
        out.walls.push_back({{door + kDoorWidth, y}, {r.x1, y}, t});
      }
      out.rooms[idx] = a;
      out.rooms.push_back(b);
      split = true;
      break;
    }
    if (!split) return std::nullopt;
  }
  return out;
}

bool segment_hits_rect(Vec2 a, Vec2 b, const Rect& r) {
  // Liang-Barsky clip of segment ab against r.
  double t0 = 0.0;
  double t1 = 1.0;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - r.x0, r.x1 - a.x, a.y - r.y0, r.y1 - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  return true;
}

Vec2 closest_point(const Rect& r, Vec2 p) {
  return {std::clamp(p.x, r.x0, r.x1), std::clamp(p.y, r.y0, r.y1)};
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Train:
      return "train";
    case Phase::ValSeenCategory:
      return "val_sc_ui";
    case Phase::ValUnseenCategory:
      return "val_uc_ui";
  }
  return "train";
}

Phase phase_from_string(std::string_view s) {
  if (s == "train") return Phase::Train;
  if (s == "val_sc_ui" || s == "val-scui") return Phase::ValSeenCategory;
  if (s == "val_uc_ui" || s == "val-ucui") return Phase::ValUnseenCategory;
  throw Error(fmt::format("unknown phase '{}'", s));
}

const ObjectCatalog& default_object_catalog() {
  static const ObjectCatalog catalog = make_default_catalog();
  return catalog;
}

std::span<const std::string> receptacle_category_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& s : kReceptacleSpecs) v.emplace_back(s.name);
    return v;
  }();
  return names;
}

Rect WallSegment::box() const {
  const double h = 0.5 * thickness;
  return {std::min(a.x, b.x) - h, std::min(a.y, b.y) - h, std::max(a.x, b.x) + h,
          std::max(a.y, b.y) + h};
}

const Receptacle* Scene::find_receptacle(std::string_view rid) const {
  for (const auto& r : receptacles) {
    if (r.id == rid) return &r;
  }
  return nullptr;
}

bool Scene::navigable(Vec2 p) const {
  const Cell c = frame.to_cell(p);
  return nav.in_bounds(c) && nav[c] != 0;
}

const ObjectInstance* Episode::find_object(std::string_view oid) const {
  for (const auto& o : objects) {
    if (o.id == oid) return &o;
  }
  return nullptr;
}

bool Episode::is_target(std::string_view object_id) const {
  return std::find(target_object_ids.begin(), target_object_ids.end(), object_id) !=
         target_object_ids.end();
}

void rasterize_occupancy(Scene& scene) {
  const Rect& b = scene.bounds;
  const double cs = scene.frame.cell_size;
  scene.frame.origin = {b.x0 - kGridMargin, b.y0 - kGridMargin};
  const int cols = static_cast<int>(std::ceil((b.width() + 2 * kGridMargin) / cs - 1e-9));
  const int rows = static_cast<int>(std::ceil((b.depth() + 2 * kGridMargin) / cs - 1e-9));
  scene.occupancy = BinaryGrid(rows, cols, 0);

  auto mark = [&](const Rect& r) {
    const Cell lo = scene.frame.to_cell({r.x0, r.y0});
    const Cell hi = scene.frame.to_cell({r.x1, r.y1});
    for (int row = std::max(lo.row, 0); row <= std::min(hi.row, rows - 1); ++row) {
      for (int col = std::max(lo.col, 0); col <= std::min(hi.col, cols - 1); ++col) {
        // Cell square must overlap the rect interior, not just touch its edge.
        const double cx0 = scene.frame.origin.x + col * cs;
        const double cy0 = scene.frame.origin.y + row * cs;
        if (cx0 < r.x1 && cx0 + cs > r.x0 && cy0 < r.y1 && cy0 + cs > r.y0) {
          scene.occupancy(row, col) = 1;
        }
      }
    }
  };

  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) {
      if (!b.contains(scene.frame.center({row, col}))) scene.occupancy(row, col) = 1;
    }
  }
  for (const auto& w : scene.walls) mark(w.box());
  for (const auto& r : scene.receptacles) mark(r.footprint);
}

BinaryGrid build_nav_grid(const BinaryGrid& occupancy, double robot_radius, double cell_size) {
  const int radius = static_cast<int>(std::ceil(robot_radius / cell_size - 1e-9));
  BinaryGrid blocked = dilate_chebyshev(occupancy, radius);
  BinaryGrid free(occupancy.rows(), occupancy.cols(), 0);
  for (std::size_t i = 0; i < free.size(); ++i) free.raw()[i] = blocked.raw()[i] ? 0 : 1;
  BinaryGrid nav = largest_component(free);
  if (count_set(nav) == 0) throw Error("no navigable cell");
  return nav;
}

std::vector<Viewpoint> generate_viewpoints(const Scene& scene, const Receptacle& receptacle,
                                           const ViewpointParams& params) {
  std::vector<Viewpoint> out;
  const Rect& fp = receptacle.footprint;
  const Rect outer = fp.inflated(params.max_distance);
  const int nx = static_cast<int>(std::floor(outer.width() / params.spacing + 1e-9));
  const int ny = static_cast<int>(std::floor(outer.depth() / params.spacing + 1e-9));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const Vec2 p{outer.x0 + i * params.spacing, outer.y0 + j * params.spacing};
      const double d = fp.distance(p);
      if (d < params.min_distance || d > params.max_distance) continue;
      if (!scene.navigable(p)) continue;
      const Vec2 q = closest_point(fp, p);
      bool blocked = false;
      for (const auto& w : scene.walls) {
        if (segment_hits_rect(p, q, w.box())) {
          blocked = true;
          break;
        }
      }
      if (!blocked) out.push_back({p, receptacle.id});
    }
  }
  return out;
}

Scene generate_scene(std::uint64_t seed, const SceneGenParams& params, std::string id) {
  if (params.rooms < 1 || params.rooms > 5) throw Error("room count must be in [1, 5]");
  if (params.width <= 0 || params.depth <= 0 || params.width > 20.0 || params.depth > 20.0) {
    throw Error("apartment bounds must be within 20 x 20 m");
  }
  if (params.receptacles < 1) throw Error("at least one receptacle required");

  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    Rng rng(derive_seed(seed, fmt::format("scene-attempt-{}", attempt)));
    Scene scene;
    scene.id = id.empty() ? fmt::format("scene_{}", seed) : id;
    scene.seed = seed;
    scene.bounds = {0.0, 0.0, params.width, params.depth};
    scene.robot_radius = params.robot_radius;

    auto layout = make_layout(scene.bounds, params.rooms, rng);
    if (!layout) continue;
    scene.walls = layout->walls;
    for (std::size_t i = 0; i < layout->rooms.size(); ++i) {
      scene.rooms.push_back({fmt::format("room_{}", i), layout->rooms[i]});
    }

    std::vector<std::string> cats(receptacle_category_names().begin(),
                                  receptacle_category_names().end());
    rng.shuffle(cats);
    bool ok = true;
    for (int k = 0; k < params.receptacles && ok; ++k) {
      const ReceptacleSpec& spec = spec_for(cats[static_cast<std::size_t>(k) % cats.size()]);
      bool placed = false;
      for (int tries = 0; tries < 200 && !placed; ++tries) {
        // Rooms weighted by area.
        double total = 0.0;
        for (const auto& r : scene.rooms) total += r.bounds.area();
        double pick = rng.uniform() * total;
        const Room* room = &scene.rooms.back();
        for (const auto& r : scene.rooms) {
          if (pick < r.bounds.area()) {
            room = &r;
            break;
          }
          pick -= r.bounds.area();
        }
        const double scale = rng.uniform(0.85, 1.15);
        double w = spec.width * scale;
        double d = std::min(spec.depth * scale, 0.9);
        if (rng.bernoulli(0.5)) std::swap(w, d);
        const Rect inner = room->bounds.inflated(-params.clearance - 0.5 * kWallThickness);
        if (inner.width() < w || inner.depth() < d) continue;
        const double x0 = rng.uniform(inner.x0, inner.x1 - w);
        const double y0 = rng.uniform(inner.y0, inner.y1 - d);
        const Rect fp{x0, y0, x0 + w, y0 + d};
        bool clash = false;
        for (const auto& other : scene.receptacles) {
          if (other.footprint.inflated(params.clearance).overlaps(fp)) {
            clash = true;
            break;
          }
        }
        if (clash) continue;
        Receptacle rec;
        rec.id = fmt::format("rec_{}", k);
        rec.category = spec.name;
        rec.footprint = fp;
        rec.surface_height = spec.height;
        rec.surface = fp.inflated(-kSurfaceInset);
        rec.room_id = room->id;
        if (rec.surface.area() < kMinPlaceableArea) continue;
        scene.receptacles.push_back(std::move(rec));
        placed = true;
      }
      ok = placed;
    }
    if (!ok) continue;

    rasterize_occupancy(scene);
    try {
      scene.nav = build_nav_grid(scene.occupancy, params.robot_radius, scene.frame.cell_size);
    } catch (const Error&) {
      continue;
    }
    std::set<std::string> reachable_categories;
    bool all_reachable = true;
    for (const auto& r : scene.receptacles) {
      auto vps = generate_viewpoints(scene, r);
      if (vps.empty()) all_reachable = false;
      reachable_categories.insert(r.category);
      scene.viewpoints[r.id] = std::move(vps);
    }
    if (!all_reachable) continue;
    if (params.receptacles >= 2 && reachable_categories.size() < 2) continue;

    for (const auto& name : receptacle_category_names()) {
      scene.catalog.push_back({name, CategoryKind::Receptacle, CategorySplit::Seen});
    }
    for (const auto& c : default_object_catalog().categories) scene.catalog.push_back(c);
    return scene;
  }
  throw GenerationError(fmt::format(
      "unsatisfiable: could not lay out {} receptacles in {} room(s) of {:.1f} x {:.1f} m "
      "after {} attempts",
      params.receptacles, params.rooms, params.width, params.depth, params.max_retries));
}

std::vector<ObjectTemplate> SplitAssignment::pool(Phase phase,
                                                  std::span<const ObjectTemplate> templates) const {
  std::vector<ObjectTemplate> out;
  for (const auto& t : templates) {
    const bool cat_seen = seen_categories.contains(t.category);
    const bool inst_seen = seen_instances.contains(t.id);
    bool keep = false;
    switch (phase) {
      case Phase::Train:
        keep = cat_seen && inst_seen;
        break;
      case Phase::ValSeenCategory:
        keep = cat_seen && !inst_seen;
        break;
      case Phase::ValUnseenCategory:
        keep = unseen_categories.contains(t.category);
        break;
    }
    if (keep) out.push_back(t);
  }
  return out;
}

SplitAssignment assign_splits(std::span<const Category> catalog,
                              std::span<const ObjectTemplate> templates, std::uint64_t seed) {
  std::vector<std::string> names;
  for (const auto& c : catalog) {
    if (c.kind == CategoryKind::Object) names.push_back(c.name);
  }
  if (names.size() < 3) throw Error("split assignment needs at least 3 object categories");
  std::sort(names.begin(), names.end());

  Rng rng(derive_seed(seed, "category-split"));
  rng.shuffle(names);
  const std::size_t n_seen = names.size() * 2 / 3;
  SplitAssignment out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    (i < n_seen ? out.seen_categories : out.unseen_categories).insert(names[i]);
  }

  std::map<std::string, std::vector<std::string>> by_category;
  for (const auto& t : templates) by_category[t.category].push_back(t.id);
  for (auto& [cat, ids] : by_category) {
    if (!out.seen_categories.contains(cat)) {
      out.unseen_instances.insert(ids.begin(), ids.end());
      continue;
    }
    std::sort(ids.begin(), ids.end());
    Rng irng(derive_seed(seed, "instance-split/" + cat));
    irng.shuffle(ids);
    const std::size_t n = ids.size() * 2 / 3;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      (i < n ? out.seen_instances : out.unseen_instances).insert(ids[i]);
    }
  }
  return out;
}

std::pair<int, int> object_count_range(double total_surface_area) {
  const int lo = std::max(1, round_half_up(1.5 * total_surface_area));
  const int hi = std::max(1, round_half_up(2.0 * total_surface_area));
  return {lo, hi};
}

std::optional<ObjectInstance> try_place_on(const Receptacle& rec, const ObjectTemplate& tmpl,
                                           std::span<const ObjectInstance> existing, Rng& rng,
                                           int attempts) {
  const Rect inner = rec.surface.inflated(-tmpl.radius);
  if (inner.x1 < inner.x0 || inner.y1 < inner.y0) return std::nullopt;
  for (int i = 0; i < attempts; ++i) {
    const Vec2 p{rng.uniform(inner.x0, inner.x1), rng.uniform(inner.y0, inner.y1)};
    bool clash = false;
    for (const auto& o : existing) {
      if (o.support != Support::OnReceptacle || o.receptacle_id != rec.id) continue;
      if ((o.position.xy() - p).norm() < o.radius + tmpl.radius) {
        clash = true;
        break;
      }
    }
    if (clash) continue;
    ObjectInstance obj;
    obj.template_id = tmpl.id;
    obj.category = tmpl.category;
    obj.radius = tmpl.radius;
    obj.height = tmpl.height;
    obj.position = {p.x, p.y, rec.surface_height};
    obj.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    obj.support = Support::OnReceptacle;
    obj.receptacle_id = rec.id;
    return obj;
  }
  return std::nullopt;
}

PlacementResult sample_object_placements(const Scene& scene,
                                         std::span<const ObjectTemplate> pool,
                                         std::uint64_t seed,
                                         std::span<const ObjectInstance> fixed) {
  PlacementResult out;
  out.objects.assign(fixed.begin(), fixed.end());
  std::vector<const Receptacle*> usable;
  double area = 0.0;
  for (const auto& r : scene.receptacles) {
    area += r.surface.area();
    auto it = scene.viewpoints.find(r.id);
    if (it != scene.viewpoints.end() && !it->second.empty()) usable.push_back(&r);
  }
  Rng rng(derive_seed(seed, "placements"));
  const auto [lo, hi] = object_count_range(area);
  out.requested = static_cast<int>(rng.uniform_int(lo, hi));
  if (usable.empty() || pool.empty()) {
    out.achieved = static_cast<int>(out.objects.size());
    out.warning = out.achieved < out.requested;
    return out;
  }
  double usable_area = 0.0;
  for (const auto* r : usable) usable_area += r->surface.area();

  int failures = 0;
  int next_id = static_cast<int>(out.objects.size());
  while (static_cast<int>(out.objects.size()) < out.requested && failures < 20) {
    const ObjectTemplate& tmpl = pool[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    double pick = rng.uniform() * usable_area;
    const Receptacle* rec = usable.back();
    for (const auto* r : usable) {
      if (pick < r->surface.area()) {
        rec = r;
        break;
      }
      pick -= r->surface.area();
    }
    auto obj = try_place_on(*rec, tmpl, out.objects, rng);
    if (!obj) {
      ++failures;
      continue;
    }
    obj->id = fmt::format("obj_{}", next_id++);
    out.objects.push_back(std::move(*obj));
  }
  out.achieved = static_cast<int>(out.objects.size());
  out.warning = out.achieved < out.requested;
  return out;
}

Episode generate_episode(const Scene& scene, const ObjectCatalog& catalog,
                         const SplitAssignment& splits, Phase phase, std::uint64_t seed,
                         std::string id) {
  Rng rng(derive_seed(seed, "episode"));
  Episode ep;
  ep.id = id.empty() ? fmt::format("{}_ep_{}", scene.id, seed) : std::move(id);
  ep.scene_id = scene.id;
  ep.seed = seed;
  ep.split = phase;

  const auto pool = splits.pool(phase, catalog.templates);
  if (pool.empty()) throw Error("no feasible episode: empty object pool for split " + to_string(phase));

  // Receptacle categories with at least one instance that has viewpoints.
  std::map<std::string, std::vector<const Receptacle*>> reachable;
  for (const auto& r : scene.receptacles) {
    auto it = scene.viewpoints.find(r.id);
    if (it != scene.viewpoints.end() && !it->second.empty()) reachable[r.category].push_back(&r);
  }
  std::set<std::string> present;
  for (const auto& r : scene.receptacles) present.insert(r.category);
  if (reachable.empty()) throw Error("no feasible episode: no reachable start receptacle");
  if (reachable.size() < 2) throw Error("no feasible episode: no reachable goal receptacle");

  std::vector<std::string> start_cats;
  for (const auto& [cat, recs] : reachable) start_cats.push_back(cat);

  std::vector<std::string> pool_cats;
  for (const auto& t : pool) {
    if (std::find(pool_cats.begin(), pool_cats.end(), t.category) == pool_cats.end()) {
      pool_cats.push_back(t.category);
    }
  }

  for (int attempt = 0; attempt < 32; ++attempt) {
    const std::string start_cat = rng.pick(start_cats);
    std::vector<std::string> goal_cats;
    for (const auto& c : start_cats) {
      if (c != start_cat) goal_cats.push_back(c);
    }
    const std::string goal_cat = rng.pick(goal_cats);
    const std::string object_cat = rng.pick(pool_cats);
    std::vector<ObjectTemplate> cat_pool;
    std::vector<ObjectTemplate> distractors;
    for (const auto& t : pool) (t.category == object_cat ? cat_pool : distractors).push_back(t);

    const Receptacle* start_rec = rng.pick(reachable.at(start_cat));
    auto target = try_place_on(*start_rec, rng.pick(cat_pool), {}, rng);
    if (!target) continue;
    target->id = "obj_0";
    std::vector<ObjectInstance> fixed{*target};
    auto placements = sample_object_placements(
        scene, distractors.empty() ? std::span<const ObjectTemplate>(cat_pool) : distractors,
        derive_seed(seed, fmt::format("placements-{}", attempt)), fixed);

    ep.objects = std::move(placements.objects);
    for (auto& o : ep.objects) {
      o.instance_split = splits.seen_instances.contains(o.template_id) ? InstanceSplit::Seen
                                                                       : InstanceSplit::Unseen;
    }
    ep.requested_objects = placements.requested;
    ep.placement_warning = placements.warning;
    ep.object_category = object_cat;
    ep.start_receptacle_category = start_cat;
    ep.goal_receptacle_category = goal_cat;
    ep.target_object_ids.clear();
    std::set<std::string> target_recs;
    for (const auto& o : ep.objects) {
      if (o.category != object_cat || o.support != Support::OnReceptacle) continue;
      const Receptacle* r = scene.find_receptacle(o.receptacle_id);
      if (r && r->category == start_cat) {
        ep.target_object_ids.push_back(o.id);
        target_recs.insert(r->id);
      }
    }

    ep.viewpoints.clear();
    std::vector<Cell> target_cells;
    for (const auto& r : scene.receptacles) {
      if (r.category != start_cat && r.category != goal_cat) continue;
      const auto& vps = scene.viewpoints.at(r.id);
      ep.viewpoints[r.id] = vps;
      if (target_recs.contains(r.id)) {
        for (const auto& v : vps) target_cells.push_back(scene.frame.to_cell(v.position));
      }
    }

    const Grid<int> hops = bfs_hops(scene.nav, target_cells);
    std::vector<Cell> spawn;
    for (int row = 0; row < hops.rows(); ++row) {
      for (int col = 0; col < hops.cols(); ++col) {
        if (hops(row, col) >= 0 && hops(row, col) * scene.frame.cell_size >= kMinSpawnGeodesic) {
          spawn.push_back({row, col});
        }
      }
    }
    if (spawn.empty()) continue;
    const Cell s = rng.pick(spawn);
    const Vec2 p = scene.frame.center(s);
    ep.robot_start = {p.x, p.y, rng.uniform(-std::numbers::pi, std::numbers::pi)};
    return ep;
  }
  throw Error(
      "no feasible episode: no navigable spawn at least 3 m (geodesic) from the target "
      "viewpoints");
}

}  // namespace ovmm
