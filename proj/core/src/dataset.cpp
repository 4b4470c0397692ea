// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "svs/io.hpp"

namespace svs {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string view_name(int id, char eye, const char* prefix, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d_%c.%s", prefix, id, eye, ext);
  return buf;
}

}  // namespace

StereoRig DatasetManifest::rig_for(int view_index) const {
  if (view_index < 0 || view_index >= static_cast<int>(views.size()))
    throw std::invalid_argument("rig_for: view index out of range");
  StereoRig rig;
  rig.intrinsics = intrinsics;
  rig.left_pose = views[static_cast<size_t>(view_index)].pose;
  rig.baseline = baseline;
  return rig;
}

std::string DatasetManifest::resolve(const std::string& relative) const {
  return (fs::path(root) / relative).string();
}

void DatasetManifest::validate() const {
  if (views.empty()) throw std::invalid_argument("manifest: no views");
  if (baseline <= 0.0) throw std::invalid_argument("manifest: baseline <= 0");
  if (near <= 0.0 || far <= near)
    throw std::invalid_argument("manifest: bad depth bounds");
  intrinsics.validate();
  for (const ViewRecord& v : views) {
    v.pose.validate();
    for (const std::string& rel :
         {v.image_left, v.image_right, v.depth_left, v.depth_right})
      if (!fs::exists(resolve(rel)))
        throw std::runtime_error("manifest: missing file " + resolve(rel));
  }
}

DatasetManifest generate_dataset(const scene::Scene& scene,
                                 const std::vector<Pose>& trajectory,
                                 const Intrinsics& intrinsics, double baseline,
                                 std::uint64_t seed, const std::string& out_dir) {
  if (trajectory.size() < 4)
    throw std::invalid_argument(
        "generate_dataset: need >= 4 viewpoints (3 source pairs + 1 target)");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw std::runtime_error("generate_dataset: cannot create " + out_dir);

  DatasetManifest m;
  m.baseline = baseline;
  m.intrinsics = intrinsics;
  m.near = scene.near;
  m.far = scene.far;
  m.seed = seed;
  m.root = out_dir;

  for (size_t n = 0; n < trajectory.size(); ++n) {
    StereoRig rig;
    rig.intrinsics = intrinsics;
    rig.left_pose = trajectory[n];
    rig.baseline = baseline;
    rig.validate();

    ViewRecord rec;
    rec.id = static_cast<int>(n);
    rec.pose = rig.left_pose;
    rec.image_left = view_name(rec.id, 'L', "view", "ppm");
    rec.image_right = view_name(rec.id, 'R', "view", "ppm");
    rec.depth_left = view_name(rec.id, 'L', "depth", "pfm");
    rec.depth_right = view_name(rec.id, 'R', "depth", "pfm");

    const scene::ViewRender left = scene::render_view(scene, intrinsics, rig.left_pose);
    const scene::ViewRender right =
        scene::render_view(scene, intrinsics, rig.right_pose());
    write_ppm(m.resolve(rec.image_left), left.rgb, seed);
    write_ppm(m.resolve(rec.image_right), right.rgb, seed);
    write_pfm(m.resolve(rec.depth_left), left.depth);
    write_pfm(m.resolve(rec.depth_right), right.depth);
    m.views.push_back(rec);
  }

  ordered_json j;
  j["baseline"] = m.baseline;
  j["intrinsics"] = {{"fx", intrinsics.fx},         {"fy", intrinsics.fy},
                     {"cx", intrinsics.cx},         {"cy", intrinsics.cy},
                     {"width", intrinsics.width},   {"height", intrinsics.height}};
  j["near"] = m.near;
  j["far"] = m.far;
  j["seed"] = m.seed;
  j["views"] = ordered_json::array();
  for (const ViewRecord& v : m.views) {
    ordered_json jv;
    jv["id"] = v.id;
    jv["image_left"] = v.image_left;
    jv["image_right"] = v.image_right;
    jv["depth_left"] = v.depth_left;
    jv["depth_right"] = v.depth_right;
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot[static_cast<size_t>(3 * r + c)] = v.pose.rotation(r, c);
    jv["rotation"] = rot;
    jv["translation"] = {v.pose.translation.x(), v.pose.translation.y(),
                         v.pose.translation.z()};
    j["views"].push_back(jv);
  }

  std::ofstream out(m.resolve("manifest.json"), std::ios::binary);
  if (!out) throw std::runtime_error("generate_dataset: cannot write manifest");
  out << j.dump(2) << "\n";
  out.close();

  m.validate();
  return m;
}

DatasetManifest read_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.json").string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("read_manifest: malformed JSON in " + path + ": " +
                             e.what());
  }

  DatasetManifest m;
  m.root = dir;
  try {
    m.baseline = j.at("baseline").get<double>();
    const auto& ji = j.at("intrinsics");
    m.intrinsics.fx = ji.at("fx").get<double>();
    m.intrinsics.fy = ji.at("fy").get<double>();
    m.intrinsics.cx = ji.at("cx").get<double>();
    m.intrinsics.cy = ji.at("cy").get<double>();
    m.intrinsics.width = ji.at("width").get<int>();
    m.intrinsics.height = ji.at("height").get<int>();
    m.near = j.at("near").get<double>();
    m.far = j.at("far").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jv : j.at("views")) {
      ViewRecord v;
      v.id = jv.at("id").get<int>();
      v.image_left = jv.at("image_left").get<std::string>();
      v.image_right = jv.at("image_right").get<std::string>();
      v.depth_left = jv.at("depth_left").get<std::string>();
      v.depth_right = jv.at("depth_right").get<std::string>();
      const auto rot = jv.at("rotation").get<std::vector<double>>();
      if (rot.size() != 9)
        throw std::runtime_error("rotation must have 9 entries");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          v.pose.rotation(r, c) = rot[static_cast<size_t>(3 * r + c)];
      const auto tr = jv.at("translation").get<std::vector<double>>();
      if (tr.size() != 3)
        throw std::runtime_error("translation must have 3 entries");
      v.pose.translation = Vec3(tr[0], tr[1], tr[2]);
      m.views.push_back(v);
    }
  } catch (const ordered_json::exception& e) {
    throw std::runtime_error("read_manifest: schema error in " + path + ": " +
                             e.what());
  }
  m.validate();
  return m;
}

LoadedView load_view(const DatasetManifest& m, int view_index) {
  if (view_index < 0 || view_index >= static_cast<int>(m.views.size()))
    throw std::invalid_argument("load_view: view index out of range");
  const ViewRecord& v = m.views[static_cast<size_t>(view_index)];
  LoadedView out;
  out.image_left = read_ppm(m.resolve(v.image_left)).image;
  out.image_right = read_ppm(m.resolve(v.image_right)).image;
  out.depth_left = read_pfm(m.resolve(v.depth_left));
  out.depth_right = read_pfm(m.resolve(v.depth_right));
  return out;
}

}  // namespace svs
