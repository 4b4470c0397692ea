// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "svs/geometry.hpp"
#include "svs/image.hpp"

namespace svs::scene {

enum class AlbedoKind { Flat, Checker, Stripes };

// Procedural albedo evaluated in world space so every view sees the same
// pattern. `scale` is the pattern period in meters; `phase` shifts it.
struct Albedo {
  AlbedoKind kind = AlbedoKind::Flat;
  Vec3 color_a = Vec3(0.8, 0.8, 0.8);
  Vec3 color_b = Vec3(0.2, 0.2, 0.2);
  double scale = 0.25;
  Vec3 stripe_dir = Vec3(1.0, 0.0, 0.0);
  double phase = 0.0;

  Vec3 sample(const Vec3& world_point) const;
};

struct Sphere {
  Vec3 center;
  double radius = 1.0;
};

struct Box {
  Vec3 min;
  Vec3 max;
};

// Finite textured rectangle: corners origin, origin+edge_u, origin+edge_v,
// origin+edge_u+edge_v.
struct Rect {
  Vec3 origin;
  Vec3 edge_u;
  Vec3 edge_v;
};

struct Primitive {
  std::variant<Sphere, Box, Rect> shape;
  Albedo albedo;
};

struct Scene {
  std::vector<Primitive> primitives;
  Vec3 background = Vec3(0.05, 0.06, 0.10);
  Vec3 light_dir = Vec3(0.3, 0.8, 0.5).normalized();  // direction light travels
  double ambient = 0.3;
  double near = 1.0;
  double far = 4.0;

  void validate() const;  // near > 0, far > near
};

struct Hit {
  bool valid = false;
  double t = 0.0;  // distance along the (unit) ray direction
  int prim_id = -1;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
};

// Closest-hit intersection; ties are broken by primitive order.
Hit trace(const Scene& scene, const Ray& ray);

// Lambertian shading under the scene's single directional light.
Vec3 shade(const Scene& scene, const Hit& hit);

struct ViewRender {
  Grid rgb;    // 3 channels in [0,1]
  Grid depth;  // 1 channel, camera z-depth in meters, 0 = background
};

// Ray-casts one pinhole view. Depth is the camera-frame z coordinate of the
// closest hit (not ray length), so a fronto-parallel plane maps to a constant
// depth map. Resolution capped at 512x512.
ViewRender render_view(const Scene& scene, const Intrinsics& k, const Pose& pose);

// Fixed demo layout: checkered ground, striped sphere, flat-color box, with
// all visible depths inside [near, far]. The seed perturbs only albedo colors
// and pattern phases, never geometry.
Scene make_demo_scene(std::uint64_t seed);

// Left-eye poses on a horizontal arc of the given radius around `focus`, all
// looking at `focus`. Angles span [-half_angle, +half_angle] radians.
std::vector<Pose> arc_trajectory(int n_views, const Vec3& focus, double radius,
                                 double elevation, double half_angle);

// Arc tuned so the demo scene fills the frame and all depths stay in bounds.
std::vector<Pose> demo_trajectory(int n_views);

// Camera defaults for the demo dataset: 96x64 with the focal length scaled
// proportionally from a 711 px / 864-wide reference sensor.
Intrinsics demo_intrinsics();

}  // namespace svs::scene
