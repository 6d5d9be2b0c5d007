#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace jslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

Mat3 skew(const Vec3& v);

/// Rotation matrix of the axis-angle vector `w` (Rodrigues).
Mat3 so3_exp(const Vec3& w);
Eigen::Quaterniond quat_exp(const Vec3& w);

/// Rigid transform x -> R x + t, stored as a unit quaternion and translation.
///
/// A pose named `T_a_b` maps coordinates of frame b into frame a. Registration
/// results are frame-in-map poses: they map frame (camera) coordinates into map
/// coordinates.
class Pose {
 public:
  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Vec3& t);
  Pose(const Mat3& R, const Vec3& t);

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat4& m);
  /// Keeps `q` bit for bit when it is already canonical and unit up to
  /// rounding, so files read back reproduce the stored numbers.
  static Pose from_stored(const Eigen::Quaterniond& q, const Vec3& t);

  const Eigen::Quaterniond& rotation() const { return q_; }
  const Vec3& translation() const { return t_; }
  Mat3 rotation_matrix() const { return q_.toRotationMatrix(); }
  Mat4 matrix() const;

  Pose inverse() const;
  Vec3 operator*(const Vec3& p) const { return q_ * p + t_; }
  Pose operator*(const Pose& other) const;

  /// Left increment: R <- exp(w) R, t <- t + v, with delta = (w, v).
  Pose boxplus(const Vec6& delta) const;

  /// Angle of the rotation in radians, in [0, pi].
  double rotation_angle() const;

 private:
  Eigen::Quaterniond q_{Eigen::Quaterniond::Identity()};
  Vec3 t_{Vec3::Zero()};
};

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }
inline Pose invert(const Pose& p) { return p.inverse(); }
inline Vec3 transform_point(const Pose& T, const Vec3& p) { return T * p; }

/// Relative rotation angle (rad) and translation distance (m) between two poses.
struct PoseDelta {
  double angle_rad;
  double translation;
};
PoseDelta pose_difference(const Pose& a, const Pose& b);

}  // namespace jslam
