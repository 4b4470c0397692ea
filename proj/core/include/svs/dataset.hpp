// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svs/geometry.hpp"
#include "svs/image.hpp"
#include "svs/scene.hpp"

namespace svs {

struct ViewRecord {
  int id = 0;
  std::string image_left, image_right;  // paths relative to the dataset root
  std::string depth_left, depth_right;
  Pose pose;  // left eye, camera-to-world
};

struct DatasetManifest {
  double baseline = 0.0;
  Intrinsics intrinsics;
  double near = 0.0, far = 0.0;
  std::uint64_t seed = 0;
  std::vector<ViewRecord> views;
  std::string root;  // directory holding the files; not serialized

  StereoRig rig_for(int view_index) const;
  std::string resolve(const std::string& relative) const;
  void validate() const;  // files exist, bounds sane, >= 1 view
};

// Renders left/right images plus GT depth for every pose and writes
// view_{n:03}_{L|R}.ppm, depth_{n:03}_{L|R}.pfm and manifest.json into
// out_dir. Re-running with identical inputs is byte-identical.
DatasetManifest generate_dataset(const scene::Scene& scene,
                                 const std::vector<Pose>& trajectory,
                                 const Intrinsics& intrinsics, double baseline,
                                 std::uint64_t seed, const std::string& out_dir);

DatasetManifest read_manifest(const std::string& dir);

struct LoadedView {
  Grid image_left, image_right;  // rgb in [0,1]
  Grid depth_left, depth_right;  // meters, 0 = background
};

LoadedView load_view(const DatasetManifest& m, int view_index);

}  // namespace svs
