#include "jslam/geometry/pose.hpp"

#include <algorithm>
#include <cmath>

namespace jslam {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Quaterniond quat_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    // second-order accurate near zero
    Eigen::Quaterniond q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    return q.normalized();
  }
  const double half = 0.5 * theta;
  const Vec3 axis = w / theta;
  const double s = std::sin(half);
  return Eigen::Quaterniond(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

Mat3 so3_exp(const Vec3& w) { return quat_exp(w).toRotationMatrix(); }

Pose::Pose(const Eigen::Quaterniond& q, const Vec3& t) : q_(q.normalized()), t_(t) {
  if (q_.w() < 0.0) q_.coeffs() *= -1.0;
}

Pose::Pose(const Mat3& R, const Vec3& t) : Pose(Eigen::Quaterniond(R), t) {}

Pose Pose::from_stored(const Eigen::Quaterniond& q, const Vec3& t) {
  if (q.w() < 0.0 || std::abs(q.norm() - 1.0) > 1e-6) return Pose(q, t);
  Pose p;
  p.q_ = q;
  p.t_ = t;
  return p;
}

Pose Pose::from_matrix(const Mat4& m) {
  return Pose(Mat3(m.topLeftCorner<3, 3>()), Vec3(m.topRightCorner<3, 1>()));
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = t_;
  return m;
}

Pose Pose::inverse() const {
  const Eigen::Quaterniond qi = q_.conjugate();
  return Pose(qi, -(qi * t_));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(q_ * other.q_, q_ * other.t_ + t_);
}

Pose Pose::boxplus(const Vec6& delta) const {
  return Pose(quat_exp(delta.head<3>()) * q_, t_ + delta.tail<3>());
}

double Pose::rotation_angle() const {
  const double w = std::clamp(std::abs(q_.w()), 0.0, 1.0);
  const double v = q_.vec().norm();
  return 2.0 * std::atan2(v, w);
}

PoseDelta pose_difference(const Pose& a, const Pose& b) {
  const Pose rel = a.inverse() * b;
  return {rel.rotation_angle(), (a.translation() - b.translation()).norm()};
}

}  // namespace jslam
