// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace svs::scene {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Returns the smallest positive hit distance, or +inf.
double hit_sphere(const Sphere& s, const Ray& r, Vec3* normal) {
  const Vec3 oc = r.origin - s.center;
  const double b = oc.dot(r.direction);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= 1e-9) t = -b + sq;
  if (t <= 1e-9) return kInf;
  *normal = (r.origin + t * r.direction - s.center).normalized();
  return t;
}

double hit_box(const Box& box, const Ray& r, Vec3* normal) {
  double t0 = -kInf, t1 = kInf;
  int axis0 = -1;
  for (int a = 0; a < 3; ++a) {
    const double inv = 1.0 / r.direction[a];
    double ta = (box.min[a] - r.origin[a]) * inv;
    double tb = (box.max[a] - r.origin[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  double t = t0;
  int axis = axis0;
  if (t <= 1e-9) {
    // Origin inside the box: exit face. Recompute the exit axis.
    t = t1;
    if (t <= 1e-9) return kInf;
    axis = -1;
    for (int a = 0; a < 3; ++a) {
      const double inv = 1.0 / r.direction[a];
      double ta = (box.min[a] - r.origin[a]) * inv;
      double tb = (box.max[a] - r.origin[a]) * inv;
      if (ta > tb) std::swap(ta, tb);
      if (std::abs(tb - t) < 1e-12) axis = a;
    }
    if (axis < 0) axis = 0;
  }
  Vec3 n = Vec3::Zero();
  const Vec3 p = r.origin + t * r.direction;
  const double mid = 0.5 * (box.min[axis] + box.max[axis]);
  n[axis] = p[axis] > mid ? 1.0 : -1.0;
  *normal = n;
  return t;
}

double hit_rect(const Rect& rect, const Ray& r, Vec3* normal) {
  const Vec3 n = rect.edge_u.cross(rect.edge_v).normalized();
  const double denom = n.dot(r.direction);
  if (std::abs(denom) < 1e-12) return kInf;
  const double t = n.dot(rect.origin - r.origin) / denom;
  if (t <= 1e-9) return kInf;
  const Vec3 p = r.origin + t * r.direction - rect.origin;
  const double uu = rect.edge_u.squaredNorm();
  const double vv = rect.edge_v.squaredNorm();
  const double u = p.dot(rect.edge_u) / uu;
  const double v = p.dot(rect.edge_v) / vv;
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return kInf;
  *normal = n;
  return t;
}

}  // namespace

Vec3 Albedo::sample(const Vec3& p) const {
  switch (kind) {
    case AlbedoKind::Flat:
      return color_a;
    case AlbedoKind::Checker: {
      const long long ix = static_cast<long long>(std::floor((p.x() + phase) / scale));
      const long long iy = static_cast<long long>(std::floor((p.y() + phase) / scale));
      const long long iz = static_cast<long long>(std::floor((p.z() + phase) / scale));
      return ((ix + iy + iz) & 1) ? color_b : color_a;
    }
    case AlbedoKind::Stripes: {
      const double s = p.dot(stripe_dir) + phase;
      const long long i = static_cast<long long>(std::floor(s / scale));
      return (i & 1) ? color_b : color_a;
    }
  }
  return color_a;
}

void Scene::validate() const {
  if (near <= 0.0)
    throw std::invalid_argument("scene: near must be positive");
  if (far <= near)
    throw std::invalid_argument("scene: far must exceed near");
}

Hit trace(const Scene& scene, const Ray& ray) {
  Hit best;
  double best_t = kInf;
  for (size_t i = 0; i < scene.primitives.size(); ++i) {
    Vec3 normal;
    double t = kInf;
    const auto& shape = scene.primitives[i].shape;
    if (std::holds_alternative<Sphere>(shape))
      t = hit_sphere(std::get<Sphere>(shape), ray, &normal);
    else if (std::holds_alternative<Box>(shape))
      t = hit_box(std::get<Box>(shape), ray, &normal);
    else
      t = hit_rect(std::get<Rect>(shape), ray, &normal);
    if (t < best_t) {  // strict: ties keep the earlier primitive
      best_t = t;
      best.valid = true;
      best.t = t;
      best.prim_id = static_cast<int>(i);
      best.point = ray.origin + t * ray.direction;
      best.normal = normal;
    }
  }
  if (best.valid && best.normal.dot(ray.direction) > 0.0) best.normal = -best.normal;
  return best;
}

Vec3 shade(const Scene& scene, const Hit& hit) {
  if (!hit.valid) return scene.background;
  const Vec3 albedo = scene.primitives[static_cast<size_t>(hit.prim_id)]
                          .albedo.sample(hit.point);
  const Vec3 to_light = -scene.light_dir;
  const double diffuse = std::max(0.0, hit.normal.dot(to_light));
  const double level = scene.ambient + (1.0 - scene.ambient) * diffuse;
  return (albedo * level).cwiseMin(1.0).cwiseMax(0.0);
}

ViewRender render_view(const Scene& scene, const Intrinsics& k, const Pose& pose) {
  scene.validate();
  k.validate();
  pose.validate();
  if (k.width > 512 || k.height > 512)
    throw std::invalid_argument("render_view: resolution capped at 512x512");
  ViewRender out{Grid(k.width, k.height, 3), Grid(k.width, k.height, 1)};
  const Mat3 r_t = pose.rotation.transpose();
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Ray ray = pixel_ray(Vec2(x + 0.5, y + 0.5), k, pose);
      const Hit hit = trace(scene, ray);
      const Vec3 c = shade(scene, hit);
      out.rgb.at(x, y, 0) = c.x();
      out.rgb.at(x, y, 1) = c.y();
      out.rgb.at(x, y, 2) = c.z();
      if (hit.valid) {
        const Vec3 cam = r_t * (hit.point - pose.translation);
        out.depth.at(x, y) = cam.z();
      } else {
        out.depth.at(x, y) = 0.0;
      }
    }
  }
  return out;
}

Scene make_demo_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto jitter = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  Scene s;
  s.near = 1.0;
  s.far = 4.0;
  s.light_dir = Vec3(0.35, 0.75, 0.55).normalized();
  s.ambient = 0.32;
  s.background = Vec3(0.04, 0.05, 0.09);

  // Checkered ground. The world is y-down, so the ground sits at positive y.
  Primitive ground;
  ground.shape =
      Rect{Vec3(-1.8, 0.6, 0.62), Vec3(3.6, 0.0, 0.0), Vec3(0.0, 0.0, 0.63)};
  ground.albedo.kind = AlbedoKind::Checker;
  ground.albedo.scale = 0.20;
  ground.albedo.phase = jitter(0.0, 0.2);
  ground.albedo.color_a = Vec3(jitter(0.75, 0.9), jitter(0.7, 0.85), jitter(0.55, 0.7));
  ground.albedo.color_b = Vec3(jitter(0.15, 0.3), jitter(0.2, 0.35), jitter(0.3, 0.45));
  s.primitives.push_back(ground);

  // Striped sphere resting on the ground.
  Primitive ball;
  ball.shape = Sphere{Vec3(-0.28, 0.36, 0.80), 0.24};
  ball.albedo.kind = AlbedoKind::Stripes;
  ball.albedo.scale = 0.11;
  ball.albedo.stripe_dir = Vec3(0.8, 0.55, 0.25).normalized();
  ball.albedo.phase = jitter(0.0, 0.09);
  ball.albedo.color_a = Vec3(jitter(0.8, 0.95), jitter(0.25, 0.4), jitter(0.2, 0.3));
  ball.albedo.color_b = Vec3(jitter(0.9, 1.0), jitter(0.8, 0.95), jitter(0.5, 0.65));
  s.primitives.push_back(ball);

  // Flat-color box: deliberately textureless faces.
  Primitive crate;
  crate.shape = Box{Vec3(0.15, 0.10, 0.84), Vec3(0.72, 0.6, 1.16)};
  crate.albedo.kind = AlbedoKind::Flat;
  crate.albedo.color_a = Vec3(jitter(0.3, 0.45), jitter(0.5, 0.65), jitter(0.7, 0.85));
  s.primitives.push_back(crate);

  // Checkered back wall. Fills the upper image band from every arc camera so
  // most pixels see geometry; its base dips below the ground plane so no
  // background sliver opens between ground edge and wall.
  Primitive wall;
  wall.shape =
      Rect{Vec3(-2.3, -0.75, 1.25), Vec3(4.6, 0.0, 0.0), Vec3(0.0, 1.45, 0.0)};
  wall.albedo.kind = AlbedoKind::Checker;
  wall.albedo.scale = 0.19;
  wall.albedo.phase = jitter(0.0, 0.17);
  wall.albedo.color_a = Vec3(jitter(0.55, 0.7), jitter(0.6, 0.75), jitter(0.75, 0.9));
  wall.albedo.color_b = Vec3(jitter(0.25, 0.4), jitter(0.15, 0.3), jitter(0.2, 0.35));
  s.primitives.push_back(wall);

  return s;
}

std::vector<Pose> arc_trajectory(int n_views, const Vec3& focus, double radius,
                                 double elevation, double half_angle) {
  if (n_views < 1) throw std::invalid_argument("arc_trajectory: need >= 1 view");
  std::vector<Pose> poses;
  poses.reserve(static_cast<size_t>(n_views));
  for (int i = 0; i < n_views; ++i) {
    const double a = n_views == 1
                         ? 0.0
                         : -half_angle + 2.0 * half_angle * i / (n_views - 1);
    // y-down world: a camera above the focus has smaller y.
    Vec3 dir(std::sin(a), -elevation, -std::cos(a));
    dir.normalize();
    poses.push_back(look_at(focus + radius * dir, focus));
  }
  return poses;
}

std::vector<Pose> demo_trajectory(int n_views) {
  return arc_trajectory(n_views, Vec3(0.0, 0.18, 0.95), 1.50, 0.32, 0.45);
}

Intrinsics demo_intrinsics() {
  Intrinsics k;
  k.width = 96;
  k.height = 64;
  k.fx = 711.0 * 96.0 / 864.0;
  k.fy = k.fx;
  k.cx = 48.0;
  k.cy = 32.0;
  return k;
}

}  // namespace svs::scene
