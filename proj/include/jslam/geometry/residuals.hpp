#pragma once

#include <Eigen/Core>

#include "jslam/geometry/correspondence.hpp"

namespace jslam {

// Weighted residuals shared by pose refinement and bundle adjustment. Every
// residual is divided by its inlier threshold so the cost is dimensionless.
//
//   point-point : (R m + t - l) / sigma(m.z)                      3 rows
//   pixel-point : (pi(R^T (l - t)) - px) / reproj_px             2 rows
//   plane-plane : B_m^T (s n_c) / angle_th, (s d_c - d_m) / sigma 3 rows
//
// where (n_c, d_c) is the landmark plane expressed in the frame, B_m the
// tangent basis of the measured normal and s aligns the two signs.
//
// Pose increments are (w, v) applied as R <- exp(w) R, t <- t + v. Landmark
// increments are dl for points and (tangent 2-vector, d offset) for planes.

using Mat36 = Eigen::Matrix<double, 3, 6>;

struct ResidualBlock {
  int dim = 3;
  Vec3 r = Vec3::Zero();
  Mat36 J_pose = Mat36::Zero();
  Mat3 J_landmark = Mat3::Zero();
  bool valid = true;  // false when a projected landmark lies behind the camera

  double squared_norm() const { return r.head(dim).squaredNorm(); }
};

// Cost charged for a pixel residual whose landmark falls behind the camera.
inline constexpr double kInvalidResidualCost = 1e4;

int residual_dim(CorrespondenceKind kind);

ResidualBlock evaluate_residual(const Correspondence& c, const Pose& frame_in_map,
                                const CameraIntrinsics& K, const InlierThresholds& th,
                                bool with_jacobians = true);

/// Plane landmark increment on the unit sphere plus offset; no canonicalization.
PlaneEq plane_boxplus(const PlaneEq& plane, const Vec3& delta);

}  // namespace jslam
