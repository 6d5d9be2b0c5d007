#pragma once

#include <Eigen/Core>

#include "jslam/geometry/pose.hpp"

namespace jslam {

struct Pixel {
  double u = 0.0;
  double v = 0.0;

  Vec2 vec() const { return {u, v}; }
};

/// Plane n.x + d = 0 with |n| = 1.
///
/// Canonical form: the first normal component whose magnitude exceeds 1e-12 is
/// positive. Distances and residuals never rely on the sign, so a measurement
/// and a landmark of the same physical plane may carry opposite canonical
/// signs without breaking matching.
struct PlaneEq {
  Vec3 normal{0.0, 0.0, 1.0};
  double offset = 0.0;

  static PlaneEq canonical(const Vec3& normal, double offset);
  static PlaneEq through_point(const Vec3& normal, const Vec3& point);
  PlaneEq canonicalized() const { return canonical(normal, offset); }

  double signed_distance(const Vec3& x) const { return normal.dot(x) + offset; }
};

PlaneEq transform_plane(const Pose& T, const PlaneEq& plane);

/// Orthonormal 3x2 basis of the tangent space of unit vector `n`.
Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& n);

struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  bool contains(const Pixel& px) const {
    return px.u >= 0.0 && px.v >= 0.0 && px.u < width && px.v < height;
  }
  Vec3 backproject(const Pixel& px, double depth) const;
};

/// Pinhole projection; throws NonPositiveDepth when z <= 1e-9.
Pixel project(const CameraIntrinsics& K, const Vec3& p);

}  // namespace jslam
