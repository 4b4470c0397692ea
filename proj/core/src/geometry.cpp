// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace svs {

Mat3 Intrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Mat3 Intrinsics::inverse_matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = 1.0 / fx;
  k(1, 1) = 1.0 / fy;
  k(0, 2) = -cx / fx;
  k(1, 2) = -cy / fy;
  return k;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw std::invalid_argument("Intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("Intrinsics: image size must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    throw std::invalid_argument("Intrinsics: principal point outside image");
}

Intrinsics Intrinsics::scaled(int s) const {
  // Pixel (i,j) at the coarse grid covers [i*s, i*s + s) at full resolution;
  // its center maps to full-res coordinate i*s + (s-1)/2.
  Intrinsics k;
  k.fx = fx / s;
  k.fy = fy / s;
  k.cx = (cx - 0.5 * (s - 1)) / s;
  k.cy = (cy - 0.5 * (s - 1)) / s;
  k.width = width / s;
  k.height = height / s;
  return k;
}

void Pose::validate() const {
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() >= 1e-9)
    throw std::invalid_argument("Pose: rotation is not orthonormal");
  if (rotation.determinant() < 0.0)
    throw std::invalid_argument("Pose: rotation has negative determinant");
  if (!translation.allFinite())
    throw std::invalid_argument("Pose: translation is not finite");
}

Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 world_down(0.0, 1.0, 0.0);
  Vec3 right = world_down.cross(forward);
  const double n = right.norm();
  if (n < 1e-12) {
    // Looking straight up/down; pick an arbitrary horizontal right axis.
    right = Vec3(1.0, 0.0, 0.0);
  } else {
    right /= n;
  }
  const Vec3 down = forward.cross(right);
  Pose p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = down;
  p.rotation.col(2) = forward;
  p.translation = eye;
  return p;
}

void StereoRig::validate() const {
  intrinsics.validate();
  left_pose.validate();
  if (!(baseline > 0.0))
    throw std::invalid_argument("StereoRig: baseline must be positive");
}

Projection project(const Vec3& point_world, const Intrinsics& k, const Pose& pose) {
  const Vec3 pc = pose.world_to_cam(point_world);
  Projection out;
  out.depth = pc.z();
  if (pc.z() > 0.0) {
    out.pixel.x() = k.fx * pc.x() / pc.z() + k.cx;
    out.pixel.y() = k.fy * pc.y() / pc.z() + k.cy;
  }
  return out;
}

Vec3 backproject(const Vec2& pixel, double depth, const Intrinsics& k, const Pose& pose) {
  if (!(depth > 0.0))
    throw std::invalid_argument("backproject: depth must be positive, got " +
                                std::to_string(depth));
  const Vec3 pc((pixel.x() - k.cx) / k.fx * depth,
                (pixel.y() - k.cy) / k.fy * depth,
                depth);
  return pose.cam_to_world(pc);
}

Ray pixel_ray(const Vec2& pixel, const Intrinsics& k, const Pose& pose) {
  Ray r;
  r.origin = pose.center();
  const Vec3 dir_cam((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0);
  r.direction = (pose.rotation * dir_cam).normalized();
  return r;
}

Mat3 plane_homography(const Intrinsics& src_k, const Pose& src_pose,
                      const Intrinsics& dst_k, const Pose& dst_pose,
                      double depth) {
  if (!(depth > 0.0))
    throw std::invalid_argument("plane_homography: depth must be positive");
  // dst-cam -> src-cam rigid transform.
  const Mat3 r_rel = src_pose.rotation.transpose() * dst_pose.rotation;
  const Vec3 t_rel = src_pose.rotation.transpose() *
                     (dst_pose.translation - src_pose.translation);
  // Plane n.x = depth with n = +z in the dst frame.
  Mat3 h = r_rel;
  h.col(2) += t_rel / depth;
  h = src_k.matrix() * h * dst_k.inverse_matrix();
  if (std::abs(h(2, 2)) < 1e-15)
    throw std::invalid_argument("plane_homography: degenerate normalization");
  return h / h(2, 2);
}

double disparity_to_depth(double disparity_px, const StereoRig& rig) {
  if (!(disparity_px > 0.0))
    throw std::invalid_argument("disparity_to_depth: disparity must be positive, got " +
                                std::to_string(disparity_px));
  return rig.baseline * rig.intrinsics.fx / disparity_px;
}

double depth_to_disparity(double depth_m, const StereoRig& rig) {
  if (!(depth_m > 0.0))
    throw std::invalid_argument("depth_to_disparity: depth must be positive, got " +
                                std::to_string(depth_m));
  return rig.baseline * rig.intrinsics.fx / depth_m;
}

}  // namespace svs
