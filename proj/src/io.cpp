#include "ovmm/io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace ovmm {
namespace {

Json vec2_to_json(Vec2 v) { return Json::array({v.x, v.y}); }
Vec2 vec2_from_json(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

Json rect_to_json(const Rect& r) { return Json::array({r.x0, r.y0, r.x1, r.y1}); }
Rect rect_from_json(const Json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}

std::string support_name(Support s) {
  switch (s) {
    case Support::OnReceptacle:
      return "on_receptacle";
    case Support::Held:
      return "held";
    case Support::OnFloor:
      return "on_floor";
  }
  return "on_floor";
}

Support support_from_name(const std::string& s) {
  if (s == "on_receptacle") return Support::OnReceptacle;
  if (s == "held") return Support::Held;
  if (s == "on_floor") return Support::OnFloor;
  throw Error("unknown support '" + s + "'");
}

Json viewpoints_to_json(const std::map<std::string, std::vector<Viewpoint>>& vps) {
  Json out = Json::object();
  for (const auto& [rid, list] : vps) {
    Json arr = Json::array();
    for (const auto& v : list) arr.push_back(vec2_to_json(v.position));
    out[rid] = std::move(arr);
  }
  return out;
}

std::map<std::string, std::vector<Viewpoint>> viewpoints_from_json(const Json& j) {
  std::map<std::string, std::vector<Viewpoint>> out;
  for (const auto& [rid, arr] : j.items()) {
    auto& list = out[rid];
    for (const auto& p : arr) list.push_back({vec2_from_json(p), rid});
  }
  return out;
}

void check_version(const Json& j, int expected, const char* what) {
  const int v = j.at("version").get<int>();
  if (v != expected) {
    throw Error(fmt::format("{} schema version {} unsupported (expected {})", what, v, expected));
  }
}

}  // namespace

Json grid_to_json(const BinaryGrid& g) {
  const RunLength rle = rle_encode(g);
  return Json{{"rows", rle.rows}, {"cols", rle.cols}, {"first", rle.first}, {"runs", rle.runs}};
}

BinaryGrid grid_from_json(const Json& j) {
  RunLength rle;
  rle.rows = j.at("rows").get<int>();
  rle.cols = j.at("cols").get<int>();
  rle.first = j.at("first").get<std::uint8_t>();
  rle.runs = j.at("runs").get<std::vector<std::uint32_t>>();
  return rle_decode(rle);
}

Json object_to_json(const ObjectInstance& o) {
  Json j{{"id", o.id},
         {"template", o.template_id},
         {"category", o.category},
         {"radius", o.radius},
         {"height", o.height},
         {"position", Json::array({o.position.x, o.position.y, o.position.z})},
         {"yaw", o.yaw},
         {"support", support_name(o.support)},
         {"instance_split", o.instance_split == InstanceSplit::Seen ? "seen" : "unseen"}};
  if (o.support == Support::OnReceptacle) j["receptacle"] = o.receptacle_id;
  return j;
}

ObjectInstance object_from_json(const Json& j) {
  ObjectInstance o;
  o.id = j.at("id").get<std::string>();
  o.template_id = j.at("template").get<std::string>();
  o.category = j.at("category").get<std::string>();
  o.radius = j.at("radius").get<double>();
  o.height = j.at("height").get<double>();
  const auto& p = j.at("position");
  o.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
  o.yaw = j.at("yaw").get<double>();
  o.support = support_from_name(j.at("support").get<std::string>());
  if (o.support == Support::OnReceptacle) o.receptacle_id = j.at("receptacle").get<std::string>();
  o.instance_split =
      j.at("instance_split").get<std::string>() == "seen" ? InstanceSplit::Seen : InstanceSplit::Unseen;
  if (o.radius <= 0 || o.height <= 0) throw Error("object '" + o.id + "' has nonpositive size");
  return o;
}

Json scene_to_json(const Scene& s) {
  Json rooms = Json::array();
  for (const auto& r : s.rooms) rooms.push_back({{"id", r.id}, {"bounds", rect_to_json(r.bounds)}});
  Json walls = Json::array();
  for (const auto& w : s.walls) {
    walls.push_back({{"a", vec2_to_json(w.a)}, {"b", vec2_to_json(w.b)}, {"thickness", w.thickness}});
  }
  Json recs = Json::array();
  for (const auto& r : s.receptacles) {
    recs.push_back({{"id", r.id},
                    {"category", r.category},
                    {"footprint", rect_to_json(r.footprint)},
                    {"surface_height", r.surface_height},
                    {"surface", rect_to_json(r.surface)},
                    {"room", r.room_id}});
  }
  Json catalog = Json::array();
  for (const auto& c : s.catalog) {
    catalog.push_back({{"name", c.name},
                       {"kind", c.kind == CategoryKind::Object ? "object" : "receptacle"},
                       {"split", c.split == CategorySplit::Seen ? "seen" : "unseen"}});
  }
  return Json{{"version", kSceneSchemaVersion},
              {"id", s.id},
              {"seed", s.seed},
              {"bounds", rect_to_json(s.bounds)},
              {"rooms", std::move(rooms)},
              {"walls", std::move(walls)},
              {"receptacles", std::move(recs)},
              {"catalog", std::move(catalog)},
              {"grid_origin", vec2_to_json(s.frame.origin)},
              {"cell_size", s.frame.cell_size},
              {"robot_radius", s.robot_radius},
              {"occupancy", grid_to_json(s.occupancy)},
              {"nav", grid_to_json(s.nav)},
              {"viewpoints", viewpoints_to_json(s.viewpoints)}};
}

Scene scene_from_json(const Json& j) {
  check_version(j, kSceneSchemaVersion, "scene");
  Scene s;
  s.id = j.at("id").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.bounds = rect_from_json(j.at("bounds"));
  for (const auto& r : j.at("rooms")) {
    s.rooms.push_back({r.at("id").get<std::string>(), rect_from_json(r.at("bounds"))});
  }
  for (const auto& w : j.at("walls")) {
    s.walls.push_back(
        {vec2_from_json(w.at("a")), vec2_from_json(w.at("b")), w.at("thickness").get<double>()});
  }
  for (const auto& r : j.at("receptacles")) {
    Receptacle rec;
    rec.id = r.at("id").get<std::string>();
    rec.category = r.at("category").get<std::string>();
    rec.footprint = rect_from_json(r.at("footprint"));
    rec.surface_height = r.at("surface_height").get<double>();
    rec.surface = rect_from_json(r.at("surface"));
    rec.room_id = r.at("room").get<std::string>();
    if (!rec.footprint.contains(rec.surface)) {
      throw Error("receptacle '" + rec.id + "' surface lies outside its footprint");
    }
    s.receptacles.push_back(std::move(rec));
  }
  for (const auto& c : j.at("catalog")) {
    Category cat;
    cat.name = c.at("name").get<std::string>();
    cat.kind = c.at("kind").get<std::string>() == "object" ? CategoryKind::Object
                                                            : CategoryKind::Receptacle;
    cat.split = c.at("split").get<std::string>() == "seen" ? CategorySplit::Seen
                                                            : CategorySplit::Unseen;
    if (cat.kind == CategoryKind::Receptacle && cat.split == CategorySplit::Unseen) {
      throw Error("receptacle category '" + cat.name + "' cannot be unseen");
    }
    s.catalog.push_back(std::move(cat));
  }
  s.frame.origin = vec2_from_json(j.at("grid_origin"));
  s.frame.cell_size = j.at("cell_size").get<double>();
  s.robot_radius = j.at("robot_radius").get<double>();
  s.occupancy = grid_from_json(j.at("occupancy"));
  s.nav = grid_from_json(j.at("nav"));
  s.viewpoints = viewpoints_from_json(j.at("viewpoints"));
  return s;
}

Json episode_to_json(const Episode& e) {
  Json objects = Json::array();
  for (const auto& o : e.objects) objects.push_back(object_to_json(o));
  return Json{{"version", kEpisodeSchemaVersion},
              {"id", e.id},
              {"scene_id", e.scene_id},
              {"seed", e.seed},
              {"split", to_string(e.split)},
              {"objects", std::move(objects)},
              {"target_object_ids", e.target_object_ids},
              {"object_category", e.object_category},
              {"start_receptacle_category", e.start_receptacle_category},
              {"goal_receptacle_category", e.goal_receptacle_category},
              {"robot_start", Json::array({e.robot_start.x, e.robot_start.y, e.robot_start.yaw})},
              {"viewpoints", viewpoints_to_json(e.viewpoints)},
              {"requested_objects", e.requested_objects},
              {"placement_warning", e.placement_warning}};
}

Episode episode_from_json(const Json& j) {
  check_version(j, kEpisodeSchemaVersion, "episode");
  Episode e;
  e.id = j.at("id").get<std::string>();
  e.scene_id = j.at("scene_id").get<std::string>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.split = phase_from_string(j.at("split").get<std::string>());
  for (const auto& o : j.at("objects")) e.objects.push_back(object_from_json(o));
  e.target_object_ids = j.at("target_object_ids").get<std::vector<std::string>>();
  if (e.target_object_ids.empty()) throw Error("episode '" + e.id + "' has no target objects");
  e.object_category = j.at("object_category").get<std::string>();
  e.start_receptacle_category = j.at("start_receptacle_category").get<std::string>();
  e.goal_receptacle_category = j.at("goal_receptacle_category").get<std::string>();
  const auto& rs = j.at("robot_start");
  e.robot_start = {rs.at(0).get<double>(), rs.at(1).get<double>(), rs.at(2).get<double>()};
  e.viewpoints = viewpoints_from_json(j.at("viewpoints"));
  e.requested_objects = j.at("requested_objects").get<int>();
  e.placement_warning = j.at("placement_warning").get<bool>();
  return e;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

template <class F>
auto parse_file(const std::filesystem::path& path, const char* what, F&& from_json) {
  try {
    return from_json(Json::parse(read_text_file(path)));
  } catch (const Json::exception& e) {
    throw Error(fmt::format("{} file {}: {}", what, path.string(), e.what()));
  }
}

Scene load_scene(const std::filesystem::path& path) {
  return parse_file(path, "scene", scene_from_json);
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  write_text_file(path, scene_to_json(scene).dump() + "\n");
}

Episode load_episode(const std::filesystem::path& path) {
  return parse_file(path, "episode", episode_from_json);
}

void save_episode(const Episode& episode, const std::filesystem::path& path) {
  write_text_file(path, episode_to_json(episode).dump() + "\n");
}

}  // namespace ovmm
