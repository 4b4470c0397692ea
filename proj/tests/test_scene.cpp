// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/scene.hpp"

#include <cmath>

#include "doctest.h"
#include "svs/geometry.hpp"

using namespace svs;
using namespace svs::scene;

namespace {

Intrinsics small_intrinsics() {
  Intrinsics k;
  k.width = 48;
  k.height = 32;
  k.fx = 40.0;
  k.fy = 40.0;
  k.cx = 24.0;
  k.cy = 16.0;
  return k;
}

Pose origin_pose() {
  Pose p;
  p.rotation = Mat3::Identity();
  p.translation = Vec3::Zero();
  return p;
}

}  // namespace

TEST_CASE("empty scene renders background and zero depth") {
  Scene s;
  s.background = Vec3(0.1, 0.2, 0.3);
  const ViewRender r = render_view(s, small_intrinsics(), origin_pose());
  for (int y = 0; y < r.rgb.height; ++y)
    for (int x = 0; x < r.rgb.width; ++x) {
      CHECK(r.rgb.at(x, y, 0) == doctest::Approx(0.1));
      CHECK(r.rgb.at(x, y, 1) == doctest::Approx(0.2));
      CHECK(r.rgb.at(x, y, 2) == doctest::Approx(0.3));
      CHECK(r.depth.at(x, y) == 0.0);
    }
}

TEST_CASE("fronto-parallel plane gives a constant depth map") {
  Scene s;
  Primitive plane;
  plane.shape = Rect{Vec3(-50, -50, 2.0), Vec3(100, 0, 0), Vec3(0, 100, 0)};
  plane.albedo.kind = AlbedoKind::Checker;
  s.primitives.push_back(plane);
  const ViewRender r = render_view(s, small_intrinsics(), origin_pose());
  for (int y = 0; y < r.depth.height; ++y)
    for (int x = 0; x < r.depth.width; ++x)
      CHECK(r.depth.at(x, y) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("sphere center-pixel depth equals center distance minus radius") {
  Scene s;
  Primitive ball;
  ball.shape = Sphere{Vec3(0, 0, 3.0), 0.5};
  s.primitives.push_back(ball);
  const Intrinsics k = small_intrinsics();
  const ViewRender r = render_view(s, k, origin_pose());
  // The ray through the image center within half a pixel of the principal
  // point hits the sphere nearly head-on.
  const double d = r.depth.at(24, 16);
  CHECK(d == doctest::Approx(2.5).epsilon(1e-3));
}

TEST_CASE("closest hit wins and ties keep list order") {
  Scene s;
  Primitive near_plane;
  near_plane.shape = Rect{Vec3(-50, -50, 1.5), Vec3(100, 0, 0), Vec3(0, 100, 0)};
  near_plane.albedo.color_a = Vec3(1, 0, 0);
  Primitive far_plane;
  far_plane.shape = Rect{Vec3(-50, -50, 3.0), Vec3(100, 0, 0), Vec3(0, 100, 0)};
  far_plane.albedo.color_a = Vec3(0, 1, 0);
  s.primitives.push_back(far_plane);
  s.primitives.push_back(near_plane);
  const ViewRender r = render_view(s, small_intrinsics(), origin_pose());
  CHECK(r.depth.at(10, 10) == doctest::Approx(1.5));

  // Two co-planar rects: the first in the list must win the tie.
  Scene tie;
  tie.primitives.push_back(far_plane);
  Primitive same;
  same.shape = far_plane.shape;
  same.albedo.color_a = Vec3(0, 0, 1);
  tie.primitives.push_back(same);
  const ViewRender rt = render_view(tie, small_intrinsics(), origin_pose());
  const double expected =
      (Vec3(0, 1, 0) * (0.3 + 0.7 * std::abs(Vec3(0, 0, -1).dot(
                                        -Scene().light_dir)))).y();
  (void)expected;  // shading depends on light; color channel test suffices
  CHECK(rt.rgb.at(10, 10, 1) > rt.rgb.at(10, 10, 2));
}

TEST_CASE("lambertian shading scales with incidence angle") {
  Scene s;
  s.ambient = 0.2;
  s.light_dir = Vec3(0, 0, 1);  // light travels +z, plane normal faces -z
  Primitive plane;
  plane.shape = Rect{Vec3(-50, -50, 2.0), Vec3(100, 0, 0), Vec3(0, 100, 0)};
  plane.albedo.color_a = Vec3(1, 1, 1);
  s.primitives.push_back(plane);
  const ViewRender head_on = render_view(s, small_intrinsics(), origin_pose());
  CHECK(head_on.rgb.at(24, 16, 0) == doctest::Approx(1.0).epsilon(1e-9));

  s.light_dir = Vec3(0, 0, -1);  // light from behind the plane: ambient only
  const ViewRender backlit = render_view(s, small_intrinsics(), origin_pose());
  CHECK(backlit.rgb.at(24, 16, 0) == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("render is deterministic") {
  const Scene s = make_demo_scene(7);
  const Intrinsics k = demo_intrinsics();
  const Pose p = demo_trajectory(4)[1];
  const ViewRender a = render_view(s, k, p);
  const ViewRender b = render_view(s, k, p);
  CHECK(a.rgb.data == b.rgb.data);
  CHECK(a.depth.data == b.depth.data);
}

TEST_CASE("demo scene keeps every visible depth inside the scene bounds") {
  const Scene s = make_demo_scene(42);
  const Intrinsics k = demo_intrinsics();
  const auto poses = demo_trajectory(7);
  StereoRig rig;
  rig.intrinsics = k;
  rig.baseline = 0.08;
  int hits = 0;
  for (const Pose& p : poses) {
    rig.left_pose = p;
    for (const Pose& eye : {rig.left_pose, rig.right_pose()}) {
      const ViewRender r = render_view(s, k, eye);
      for (double d : r.depth.data) {
        if (d == 0.0) continue;
        ++hits;
        CHECK(d >= s.near);
        CHECK(d <= s.far);
      }
    }
  }
  // The scene must actually fill most of the frame.
  CHECK(hits > 7 * 2 * k.width * k.height / 2);
}

TEST_CASE("demo scene seed changes colors but never geometry") {
  const Scene a = make_demo_scene(1);
  const Scene b = make_demo_scene(2);
  REQUIRE(a.primitives.size() == b.primitives.size());
  const ViewRender ra =
      render_view(a, demo_intrinsics(),
                  demo_trajectory(4)[0]);
  const ViewRender rb =
      render_view(b, demo_intrinsics(),
                  demo_trajectory(4)[0]);
  CHECK(ra.depth.data == rb.depth.data);  // same geometry
  CHECK(ra.rgb.data != rb.rgb.data);      // different colors
}

TEST_CASE("every demo primitive intersects the depth slab from some viewpoint") {
  const Scene s = make_demo_scene(3);
  const Intrinsics k = demo_intrinsics();
  const auto poses = demo_trajectory(7);
  std::vector<bool> seen(s.primitives.size(), false);
  for (const Pose& p : poses) {
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x) {
        const Hit h = trace(s, pixel_ray(Vec2(x + 0.5, y + 0.5), k, p));
        if (!h.valid) continue;
        const Vec3 cam = p.rotation.transpose() * (h.point - p.translation);
        if (cam.z() >= s.near && cam.z() <= s.far)
          seen[static_cast<size_t>(h.prim_id)] = true;
      }
  }
  for (bool b : seen) CHECK(b);
}

TEST_CASE("resolution above the cap is rejected") {
  Scene s;
  Intrinsics k = small_intrinsics();
  k.width = 1024;
  k.cx = 512;
  CHECK_THROWS_AS(render_view(s, k, origin_pose()), std::invalid_argument);
}

TEST_CASE("scene bound validation") {
  Scene s;
  s.near = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.near = 2.0;
  s.far = 1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("box intersection reports the entry face and outward normal") {
  Scene s;
  Primitive crate;
  crate.shape = Box{Vec3(-0.5, -0.5, 2.0), Vec3(0.5, 0.5, 3.0)};
  s.primitives.push_back(crate);
  Ray r;
  r.origin = Vec3::Zero();
  r.direction = Vec3(0, 0, 1);
  const Hit h = trace(s, r);
  REQUIRE(h.valid);
  CHECK(h.t == doctest::Approx(2.0));
  CHECK(h.normal.z() == doctest::Approx(-1.0));
}
