// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace svs {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Pinhole intrinsics shared by both eyes of a rectified rig.
/// Convention (fixed globally): right-handed, camera looks down +z,
/// image x grows right, image y grows downward.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Mat3 matrix() const;
  Mat3 inverse_matrix() const;
  void validate() const;  // throws std::invalid_argument on bad fields

  /// Intrinsics of the same camera at a resolution scaled by 1/s per axis
  /// (pixel centers at integer coordinates in both grids).
  Intrinsics scaled(int s) const;
};

/// Camera-to-world pose: x_world = rotation * x_cam + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  void validate() const;  // rotation must be orthonormal, det +1

  Vec3 center() const { return translation; }
  Vec3 optical_axis() const { return rotation.col(2); }
  Vec3 world_to_cam(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }
  Vec3 cam_to_world(const Vec3& p_cam) const {
    return rotation * p_cam + translation;
  }
};

/// Builds a pose at `eye` looking at `target`, with image y aligned to
/// world +y (y-down convention, so `up` in world is -y).
Pose look_at(const Vec3& eye, const Vec3& target);

/// Rectified stereo pair: both eyes share intrinsics and rotation, the
/// right camera sits `baseline` meters along the left camera's +x axis.
struct StereoRig {
  Intrinsics intrinsics;
  Pose left_pose;
  double baseline = 0.0;

  Pose right_pose() const {
    Pose p = left_pose;
    p.translation += left_pose.rotation.col(0) * baseline;
    return p;
  }
  void validate() const;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length
};

/// Result of projecting a world point. `depth` is the z coordinate in the
/// camera frame; non-positive depth flags a point at or behind the camera
/// (returned, not thrown, so sweeping code can keep its own validity masks).
struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;

  bool in_front() const { return depth > 0.0; }
  bool inside(const Intrinsics& k) const {
    return depth > 0.0 && pixel.x() >= 0.0 && pixel.y() >= 0.0 &&
           pixel.x() <= k.width - 1.0 && pixel.y() <= k.height - 1.0;
  }
};

Projection project(const Vec3& point_world, const Intrinsics& k, const Pose& pose);

/// Inverse of project for depth > 0; throws std::invalid_argument otherwise.
Vec3 backproject(const Vec2& pixel, double depth, const Intrinsics& k, const Pose& pose);

/// Ray through a pixel center (unit direction, origin at the camera center).
Ray pixel_ray(const Vec2& pixel, const Intrinsics& k, const Pose& pose);

/// Homography mapping dst-camera pixels to src-camera pixels induced by the
/// fronto-parallel plane at `depth` in the dst camera frame. Normalized so
/// H(2,2) = 1. src == dst yields the identity.
Mat3 plane_homography(const Intrinsics& src_k, const Pose& src_pose,
                      const Intrinsics& dst_k, const Pose& dst_pose,
                      double depth);

/// depth = baseline * fx / disparity. Throws std::invalid_argument for
/// disparity <= 0 (unmatched / infinite-depth pixel).
double disparity_to_depth(double disparity_px, const StereoRig& rig);
double depth_to_disparity(double depth_m, const StereoRig& rig);

}  // namespace svs
