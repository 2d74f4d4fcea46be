#include "ovmm/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ovmm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Entry parameter of the ray into the box, or +inf when missed. Rays starting
// inside a box report a miss for that box.
double ray_box(const Vec3& o, const Vec3& d, const Box& b) {
  double tmin = -kInf;
  double tmax = kInf;
  const double lo[3] = {b.xy.x0, b.xy.y0, b.z0};
  const double hi[3] = {b.xy.x1, b.xy.y1, b.z1};
  const double oo[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  for (int k = 0; k < 3; ++k) {
    if (std::abs(dd[k]) < 1e-12) {
      if (oo[k] < lo[k] || oo[k] > hi[k]) return kInf;
      continue;
    }
    double t1 = (lo[k] - oo[k]) / dd[k];
    double t2 = (hi[k] - oo[k]) / dd[k];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return kInf;
  }
  if (tmin <= 0.0) return kInf;
  return tmin;
}

struct PixelResult {
  float depth;
  InstanceId id;
};

PixelResult trace_pixel(const PixelRay& ray, std::span<const Box> boxes, double max_range) {
  const double t_limit = max_range / ray.dir.norm();
  double best = kInf;
  InstanceId id = 0;
  for (const Box& b : boxes) {
    const double t = ray_box(ray.origin, ray.dir, b);
    if (t < best) {
      best = t;
      id = b.instance;
    }
  }
  if (ray.dir.z < 0.0) {
    const double t_floor = -ray.origin.z / ray.dir.z;
    if (t_floor < best) {
      best = t_floor;
      id = 0;
    }
  }
  if (!(best <= t_limit)) return {static_cast<float>(max_range), 0};
  return {static_cast<float>(best), id};
}

std::vector<Box> cull(std::span<const Box> boxes, const CameraModel& camera, const CameraPose& pose) {
  std::vector<Box> out;
  out.reserve(boxes.size());
  const Vec2 c = pose.position.xy();
  for (const Box& b : boxes) {
    if (b.xy.distance(c) <= camera.max_range) out.push_back(b);
  }
  return out;
}

Frame blank_frame(const CameraModel& camera) {
  Frame f;
  f.width = camera.width;
  f.height = camera.height;
  f.depth.assign(static_cast<std::size_t>(camera.pixels()), static_cast<float>(camera.max_range));
  f.semantic.assign(static_cast<std::size_t>(camera.pixels()), 0);
  return f;
}

}  // namespace

std::vector<Box> build_world_boxes(const Scene& scene, std::span<const ObjectInstance> objects) {
  std::vector<Box> boxes;
  boxes.reserve(scene.walls.size() + scene.receptacles.size() + objects.size());
  for (const auto& w : scene.walls) boxes.push_back({w.box(), 0.0, kWallHeight, 0});
  InstanceTable table{scene.receptacles.size(), objects.size()};
  for (std::size_t i = 0; i < scene.receptacles.size(); ++i) {
    const auto& r = scene.receptacles[i];
    boxes.push_back({r.footprint, 0.0, r.surface_height, table.receptacle(i)});
  }
  for (std::size_t j = 0; j < objects.size(); ++j) {
    const auto& o = objects[j];
    if (o.support == Support::Held) continue;
    const Rect xy{o.position.x - o.radius, o.position.y - o.radius, o.position.x + o.radius,
                  o.position.y + o.radius};
    boxes.push_back({xy, o.position.z, o.position.z + o.height, table.object(j)});
  }
  return boxes;
}

std::size_t Frame::count(InstanceId id) const {
  return static_cast<std::size_t>(std::count(semantic.begin(), semantic.end(), id));
}

Frame render_frame(std::span<const Box> boxes, const CameraModel& camera, const CameraPose& pose) {
  Frame f = blank_frame(camera);
  const std::vector<Box> visible = cull(boxes, camera, pose);
  const RayGenerator rays(camera, pose);
  const int w = camera.width;
  const int h = camera.height;
#pragma omp parallel for schedule(static)
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const PixelResult px = trace_pixel(rays.ray(u, v), visible, camera.max_range);
      const auto idx = static_cast<std::size_t>(v) * w + u;
      f.depth[idx] = px.depth;
      f.semantic[idx] = px.id;
    }
  }
  return f;
}

Frame render_frame_serial(std::span<const Box> boxes, const CameraModel& camera,
                          const CameraPose& pose) {
  Frame f = blank_frame(camera);
  const RayGenerator rays(camera, pose);
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const PixelResult px = trace_pixel(rays.ray(u, v), boxes, camera.max_range);
      const auto idx = static_cast<std::size_t>(v) * camera.width + u;
      f.depth[idx] = px.depth;
      f.semantic[idx] = px.id;
    }
  }
  return f;
}

void PerceptionNoiseProfile::validate() const {
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0) ||
      !(misclassify_prob >= 0.0 && misclassify_prob <= 1.0)) {
    throw Error("perception noise probabilities must lie in [0, 1]");
  }
}

void apply_perception_noise(Frame& frame, LabelMap& labels, const PerceptionNoiseProfile& noise,
                            std::span<const std::string> object_vocabulary,
                            std::span<const std::string> receptacle_vocabulary,
                            const InstanceTable& table, Rng& rng) {
  if (noise.is_ground_truth()) return;
  std::set<InstanceId> visible(frame.semantic.begin(), frame.semantic.end());
  visible.erase(0);
  std::set<InstanceId> dropped;
  for (InstanceId id : visible) {
    if (rng.bernoulli(noise.dropout_prob)) {
      dropped.insert(id);
      continue;
    }
    if (!rng.bernoulli(noise.misclassify_prob)) continue;
    auto it = labels.find(id);
    if (it == labels.end()) continue;
    const auto vocab = table.is_object(id) ? object_vocabulary : receptacle_vocabulary;
    std::vector<std::string> others;
    for (const auto& name : vocab) {
      if (name != it->second) others.push_back(name);
    }
    if (!others.empty()) it->second = rng.pick(others);
  }
  if (dropped.empty()) return;
  for (auto& s : frame.semantic) {
    if (s != 0 && dropped.contains(s)) s = 0;
  }
  for (InstanceId id : dropped) labels.erase(id);
}

}  // namespace ovmm
