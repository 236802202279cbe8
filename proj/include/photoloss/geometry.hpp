#pragma once

#include <Eigen/Core>
#include <array>
#include <utility>

#include "photoloss/image.hpp"

namespace photoloss {

/// Pinhole camera intrinsics. Pixel centers at integer coordinates,
/// origin top-left, u = column, v = row.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
};

/// Rigid transform as axis-angle rotation plus translation. A pose used as a
/// relative transform maps points from target-camera coordinates to
/// source-camera coordinates: X_src = R(rotation) * X_tgt + translation.
struct Pose {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }
  bool is_identity() const {
    return rotation.isZero(0.0) && translation.isZero(0.0);
  }

  Eigen::Matrix3d rotation_matrix() const;
  Eigen::Matrix4d matrix() const;
  void validate() const;
};

/// Continuous source-pixel coordinates per target pixel, with a validity
/// mask (true iff the projected point has positive source depth and lands
/// inside [0, W-1] x [0, H-1]).
struct FlowField {
  Grid u;
  Grid v;
  BoolGrid valid;

  int height() const { return int(u.rows()); }
  int width() const { return int(u.cols()); }
};

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

/// Rodrigues formula; below ||r|| = 1e-8 a second-order Taylor expansion is
/// used to avoid dividing by the angle.
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& r);

/// Log map of a rotation matrix; returns the canonical axis-angle vector
/// with ||r|| <= pi. Handles the small-angle and near-pi branches.
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& R);

/// d(R(r))/dr_i, i = 0..2 (Gallego-Yezzi closed form).
std::array<Eigen::Matrix3d, 3> rotation_jacobians(const Eigen::Vector3d& r);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);
Pose pose_from_matrix(const Eigen::Matrix4d& m);

/// Back-projects each target pixel with its depth, applies the pose
/// (target -> source) and reprojects into the source camera.
FlowField project(const DepthMap& depth, const Pose& pose, const Intrinsics& K);

/// Bilinear interpolation of src at flow coordinates. Coordinates are
/// clamped to image bounds before interpolation; the returned mask is a
/// copy of flow.valid.
std::pair<Image, BoolGrid> bilinear_sample(const Image& src, const FlowField& flow);

/// project followed by bilinear_sample.
std::pair<Image, BoolGrid> warp(const Image& src, const DepthMap& depth,
                                const Pose& pose, const Intrinsics& K);

}  // namespace photoloss
