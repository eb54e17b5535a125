#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <vector>

#include "erpgeo/sphere.hpp"

namespace erpgeo {

/// World-to-camera rigid transform: x_cam = R * x_world + t.
struct RigidPose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidPose identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return R * x + t; }
  RigidPose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  /// (a * b).apply(x) == a.apply(b.apply(x))
  RigidPose operator*(const RigidPose& b) const { return {R * b.R, R * b.t + t}; }
  /// Camera center in world coordinates.
  Vec3 center() const { return -(R.transpose() * t); }

  bool is_rotation(double tol = 1e-9) const {
    return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(R.determinant() - 1.0) <= tol;
  }
};

using PoseSequence = std::vector<RigidPose>;

/// Geodesic angle in radians between two rotations.
inline double rotation_angle(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(0.5 * ((a.transpose() * b).trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

/// Pose of a camera at `center` whose orientation (camera-to-world) is `cam_to_world`.
inline RigidPose pose_from_center(const Mat3& cam_to_world, const Vec3& center) {
  RigidPose p;
  p.R = cam_to_world.transpose();
  p.t = -(p.R * center);
  return p;
}

}  // namespace erpgeo
