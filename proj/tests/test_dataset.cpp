// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "svs/io.hpp"

using namespace svs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

DatasetManifest make_demo_dataset(const std::string& dir, std::uint64_t seed,
                                  int n_views = 7) {
  const scene::Scene s = scene::make_demo_scene(seed);
  const auto poses =
      scene::demo_trajectory(n_views);
  return generate_dataset(s, poses, scene::demo_intrinsics(), 0.08, seed, dir);
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("seven-view arc writes 14 images, 14 depth maps and a manifest") {
  TempDir tmp("svs_dataset_counts");
  make_demo_dataset(tmp.path.string(), 5);
  int ppm = 0, pfm = 0, json = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) {
    const auto ext = e.path().extension();
    if (ext == ".ppm") ++ppm;
    if (ext == ".pfm") ++pfm;
    if (ext == ".json") ++json;
  }
  CHECK(ppm == 14);
  CHECK(pfm == 14);
  CHECK(json == 1);
}

TEST_CASE("manifest round-trips losslessly") {
  TempDir tmp("svs_dataset_roundtrip");
  const DatasetManifest written = make_demo_dataset(tmp.path.string(), 11, 4);
  const DatasetManifest loaded = read_manifest(tmp.path.string());
  CHECK(loaded.baseline == written.baseline);
  CHECK(loaded.near == written.near);
  CHECK(loaded.far == written.far);
  CHECK(loaded.seed == written.seed);
  CHECK(loaded.intrinsics.fx == written.intrinsics.fx);
  CHECK(loaded.intrinsics.width == written.intrinsics.width);
  REQUIRE(loaded.views.size() == written.views.size());
  for (size_t i = 0; i < loaded.views.size(); ++i) {
    CHECK(loaded.views[i].id == written.views[i].id);
    CHECK(loaded.views[i].image_left == written.views[i].image_left);
    CHECK((loaded.views[i].pose.rotation - written.views[i].pose.rotation)
              .cwiseAbs()
              .maxCoeff() < 1e-15);
    CHECK((loaded.views[i].pose.translation - written.views[i].pose.translation)
              .norm() < 1e-15);
  }
}

TEST_CASE("same seed regenerates byte-identical files") {
  TempDir a("svs_dataset_det_a");
  TempDir b("svs_dataset_det_b");
  make_demo_dataset(a.path.string(), 99, 4);
  make_demo_dataset(b.path.string(), 99, 4);
  for (const auto& e : fs::directory_iterator(a.path)) {
    const auto other = b.path / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(e.path()) == slurp(other));
  }
}

TEST_CASE("fewer than four viewpoints are rejected") {
  TempDir tmp("svs_dataset_too_few");
  const scene::Scene s = scene::make_demo_scene(1);
  const auto poses = scene::demo_trajectory(3);
  CHECK_THROWS_AS(generate_dataset(s, poses, scene::demo_intrinsics(), 0.08, 1,
                                   tmp.path.string()),
                  std::invalid_argument);
}

TEST_CASE("unwritable directory raises an io error") {
  const scene::Scene s = scene::make_demo_scene(1);
  const auto poses = scene::demo_trajectory(4);
  CHECK_THROWS_AS(generate_dataset(s, poses, scene::demo_intrinsics(), 0.08, 1,
                                   "/proc/svs_not_writable"),
                  std::runtime_error);
}

TEST_CASE("left depth warped by its own disparity reproduces right depth") {
  // On co-visible smooth surface pixels, backprojecting a left pixel at its GT
  // depth and projecting into the right eye must land on a pixel whose GT
  // depth matches (rectified rig: same depth, shifted column). Inverse depth
  // is interpolated because 1/z is affine in pixel coordinates on planes.
  TempDir tmp("svs_dataset_warp");
  const std::uint64_t seed = 21;
  const DatasetManifest m = make_demo_dataset(tmp.path.string(), seed, 4);
  const scene::Scene s = scene::make_demo_scene(seed);
  const LoadedView v = load_view(m, 1);
  const StereoRig rig = m.rig_for(1);
  const Pose right = rig.right_pose();
  const Intrinsics& k = m.intrinsics;

  // Hit query in pixel-center coordinates; returns normal for planarity check.
  auto hit_at = [&](const Pose& pose, double x, double y) {
    return trace(s, pixel_ray(Vec2(x, y), k, pose));
  };

  int tested = 0;
  double worst = 0.0;
  for (int y = 1; y < k.height - 1; ++y) {
    for (int x = 1; x < k.width - 1; ++x) {
      const double d = v.depth_left.at(x, y);
      if (d <= 0.0) continue;
      const double disp = depth_to_disparity(d, rig);
      const double xr = x + 0.5 - disp;  // rectified: right pixel is left-shifted
      if (xr < 1.0 || xr > k.width - 2.0) continue;
      // Restrict to pixels whose interpolation footprint in the right image
      // lies on the same flat surface: 1/z is affine in pixel coordinates on
      // a plane, so interpolating inverse depth is exact there. Normal
      // agreement rejects box creases and the curved sphere.
      const scene::Hit left_hit = hit_at(rig.left_pose, x + 0.5, y + 0.5);
      if (!left_hit.valid) continue;
      const int x0 = static_cast<int>(std::floor(xr - 0.5));
      bool planar = true;
      for (int dx = 0; dx <= 1 && planar; ++dx) {
        const scene::Hit rh = hit_at(right, x0 + dx + 0.5, y + 0.5);
        planar = rh.valid && rh.prim_id == left_hit.prim_id &&
                 rh.normal.dot(left_hit.normal) > 1.0 - 1e-9 &&
                 v.depth_right.at(x0 + dx, y) > 0.0;
      }
      if (!planar) continue;
      const double inv0 = 1.0 / v.depth_right.at(x0, y);
      const double inv1 = 1.0 / v.depth_right.at(std::min(x0 + 1, k.width - 1), y);
      const double a = xr - 0.5 - x0;
      const double d_right = 1.0 / ((1.0 - a) * inv0 + a * inv1);
      worst = std::max(worst, std::abs(d_right - d));
      ++tested;
    }
  }
  REQUIRE(tested > 500);
  CHECK(worst < 1e-6);
}

TEST_CASE("gt disparity matches exhaustive epipolar search on textured pixels") {
  // Property: searching the rendered right image along the scanline for the
  // best color match around the GT disparity must agree within 0.5 px on
  // textured, co-visible pixels.
  TempDir tmp("svs_dataset_epipolar");
  const std::uint64_t seed = 33;
  const DatasetManifest m = make_demo_dataset(tmp.path.string(), seed, 4);
  const scene::Scene s = scene::make_demo_scene(seed);
  const LoadedView v = load_view(m, 2);
  const StereoRig rig = m.rig_for(2);
  const Pose right = rig.right_pose();
  const Intrinsics& k = m.intrinsics;

  const int R = 2;  // 5x5 comparison patch
  auto prim_at = [&](const Pose& pose, double px, double py) {
    const scene::Hit h = trace(s, pixel_ray(Vec2(px, py), k, pose));
    return h.valid ? h.prim_id : -1;
  };
  // Co-visible: the whole footprint lies on one primitive in both eyes.
  auto pure_patch = [&](int x, int y, double gt_disp) {
    const int pid = prim_at(rig.left_pose, x + 0.5, y + 0.5);
    if (pid < 0) return false;
    for (int dy = -R; dy <= R; ++dy)
      for (int dx = -R; dx <= R; ++dx) {
        if (prim_at(rig.left_pose, x + dx + 0.5, y + dy + 0.5) != pid)
          return false;
        if (prim_at(right, x + dx + 0.5 - gt_disp, y + dy + 0.5) != pid)
          return false;
      }
    return true;
  };

  // xr is an array-index coordinate: disparity d maps left column x to right
  // array position x - d.
  auto patch_cost = [&](int xl, int y, double xr) {
    double cost = 0.0;
    for (int dy = -R; dy <= R; ++dy)
      for (int dx = -R; dx <= R; ++dx)
        for (int c = 0; c < 3; ++c) {
          const double a = v.image_left.at(xl + dx, y + dy, c);
          const double b =
              sample_bilinear(v.image_right, xr + dx, y + dy, c);
          cost += (a - b) * (a - b);
        }
    return cost;
  };

  int tested = 0, agreed = 0;
  for (int y = 5; y < k.height - 5; y += 2) {
    for (int x = 10; x < k.width - 5; x += 2) {
      const double d = v.depth_left.at(x, y);
      if (d <= 0.0) continue;
      const double gt_disp = depth_to_disparity(d, rig);
      if (x - gt_disp < 4.0) continue;
      if (!pure_patch(x, y, gt_disp)) continue;
      // Texture usable for a horizontal search: gradient energy along the
      // epipolar direction, measured strictly inside the comparison patch
      // (a wider filter would admit patches that are flat where matched).
      double hgrad = 0.0;
      for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx < R; ++dx)
          for (int c = 0; c < 3; ++c) {
            const double g = v.image_left.at(x + dx + 1, y + dy, c) -
                             v.image_left.at(x + dx, y + dy, c);
            hgrad += g * g;
          }
      if (hgrad < 0.3) continue;
      // Exhaustive subpixel search over the plausible disparity range.
      double best_disp = 0.0, best_cost = 1e30;
      for (double cand = 0.0; cand <= 8.0; cand += 0.05) {
        const double cost = patch_cost(x, y, x - cand);
        if (cost < best_cost) {
          best_cost = cost;
          best_disp = cand;
        }
      }
      ++tested;
      if (std::abs(best_disp - gt_disp) <= 0.5) ++agreed;
    }
  }
  REQUIRE(tested > 50);
  // Foreshortening and quantization can still fool the rigid-patch search on
  // a few pixels; demand agreement on the overwhelming majority.
  CHECK(static_cast<double>(agreed) / tested > 0.9);
}
