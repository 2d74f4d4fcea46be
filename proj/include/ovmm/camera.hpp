#pragma once

#include <cmath>
#include <numbers>

#include "ovmm/common.hpp"

namespace ovmm {

/// Pinhole head camera. Pixel (u, v) has its center at (u + 0.5, v + 0.5);
/// v grows downward.
struct CameraModel {
  int width = 160;
  int height = 120;
  double hfov = 69.0 * std::numbers::pi / 180.0;
  double mount_height = 1.2;
  double max_range = 10.0;

  double fx() const { return 0.5 * width / std::tan(0.5 * hfov); }
  double fy() const { return fx(); }
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }
  int pixels() const { return width * height; }
  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// Camera extrinsics: position plus yaw (about +z) and pitch (positive up).
struct CameraPose {
  Vec3 position;
  double yaw = 0.0;
  double pitch = 0.0;

  Vec3 forward() const {
    return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
  }
  Vec3 left() const { return {-std::sin(yaw), std::cos(yaw), 0.0}; }
  Vec3 up() const {
    return {-std::sin(pitch) * std::cos(yaw), -std::sin(pitch) * std::sin(yaw), std::cos(pitch)};
  }
};

/// Unnormalized ray for a pixel; its forward component is 1, so a point at
/// parameter t along it has optical-axis depth t.
struct PixelRay {
  Vec3 origin;
  Vec3 dir;
};

class RayGenerator {
 public:
  RayGenerator(const CameraModel& cam, const CameraPose& pose)
      : cam_(cam), origin_(pose.position), f_(pose.forward()), l_(pose.left()), u_(pose.up()) {}

  PixelRay ray(int u, int v) const { return ray_at(u + 0.5, v + 0.5); }

  /// Ray through continuous image coordinates (pixel centers at +0.5).
  PixelRay ray_at(double x, double y) const {
    const double a = (cam_.cx() - x) / cam_.fx();
    const double b = (cam_.cy() - y) / cam_.fy();
    return {origin_, f_ + a * l_ + b * u_};
  }

  Vec3 backproject(int u, int v, double depth) const {
    const PixelRay r = ray(u, v);
    return r.origin + depth * r.dir;
  }

 private:
  CameraModel cam_;
  Vec3 origin_;
  Vec3 f_;
  Vec3 l_;
  Vec3 u_;
};

}  // namespace ovmm
