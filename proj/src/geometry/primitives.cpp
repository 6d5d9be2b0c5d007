#include "jslam/geometry/primitives.hpp"

#include <cmath>

#include "jslam/common/error.hpp"

namespace jslam {

PlaneEq PlaneEq::canonical(const Vec3& normal, double offset) {
  const double norm = normal.norm();
  PlaneEq out{normal / norm, offset / norm};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(out.normal[i]) > 1e-12) {
      if (out.normal[i] < 0.0) {
        out.normal = -out.normal;
        out.offset = -out.offset;
      }
      break;
    }
  }
  return out;
}

PlaneEq PlaneEq::through_point(const Vec3& normal, const Vec3& point) {
  const Vec3 n = normal.normalized();
  return canonical(n, -n.dot(point));
}

PlaneEq transform_plane(const Pose& T, const PlaneEq& plane) {
  const Vec3 n = T.rotation() * plane.normal;
  return PlaneEq::canonical(n, plane.offset - n.dot(T.translation()));
}

Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& n) {
  // helper axis least aligned with n
  int axis = 0;
  if (std::abs(n.y()) < std::abs(n[axis])) axis = 1;
  if (std::abs(n.z()) < std::abs(n[axis])) axis = 2;
  const Vec3 helper = Vec3::Unit(axis);
  const Vec3 b1 = n.cross(helper).normalized();
  const Vec3 b2 = n.cross(b1);
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = b1;
  B.col(1) = b2;
  return B;
}

Vec3 CameraIntrinsics::backproject(const Pixel& px, double depth) const {
  return {depth * (px.u - cx) / fx, depth * (px.v - cy) / fy, depth};
}

Pixel project(const CameraIntrinsics& K, const Vec3& p) {
  if (!(p.z() > 1e-9)) throw NonPositiveDepth();
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

}  // namespace jslam
