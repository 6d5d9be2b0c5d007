#include "jslam/geometry/residuals.hpp"

#include <cmath>

namespace jslam {

int residual_dim(CorrespondenceKind kind) {
  return kind == CorrespondenceKind::PixelPoint ? 2 : 3;
}

ResidualBlock evaluate_residual(const Correspondence& c, const Pose& T,
                                const CameraIntrinsics& K, const InlierThresholds& th,
                                bool with_jacobians) {
  ResidualBlock b;
  b.dim = residual_dim(c.kind);
  const Mat3 R = T.rotation_matrix();
  const Vec3& t = T.translation();

  switch (c.kind) {
    case CorrespondenceKind::PointPoint: {
      const double w = 1.0 / th.sigma_3d(c.meas_point.z());
      const Vec3 Rm = R * c.meas_point;
      b.r = w * (Rm + t - c.lm_point);
      if (with_jacobians) {
        b.J_pose.leftCols<3>() = -w * skew(Rm);
        b.J_pose.rightCols<3>() = w * Mat3::Identity();
        b.J_landmark = -w * Mat3::Identity();
      }
      break;
    }
    case CorrespondenceKind::PixelPoint: {
      const double w = 1.0 / th.reproj_px;
      const Vec3 rel = c.lm_point - t;
      const Vec3 x = R.transpose() * rel;
      if (x.z() <= 1e-6) {
        b.valid = false;
        break;
      }
      const double iz = 1.0 / x.z();
      b.r.head<2>() = w * Vec2(K.fx * x.x() * iz + K.cx - c.meas_pixel.u,
                               K.fy * x.y() * iz + K.cy - c.meas_pixel.v);
      if (with_jacobians) {
        Eigen::Matrix<double, 2, 3> Jpi;
        Jpi << K.fx * iz, 0.0, -K.fx * x.x() * iz * iz,
               0.0, K.fy * iz, -K.fy * x.y() * iz * iz;
        Jpi *= w;
        b.J_pose.topLeftCorner<2, 3>() = Jpi * R.transpose() * skew(rel);
        b.J_pose.topRightCorner<2, 3>() = -Jpi * R.transpose();
        b.J_landmark.topRows<2>() = Jpi * R.transpose();
      }
      break;
    }
    case CorrespondenceKind::PlanePlane: {
      const Vec3& nl = c.lm_plane.normal;
      const Vec3 nc = R.transpose() * nl;
      const double dc = c.lm_plane.offset + nl.dot(t);
      const Vec3& nm = c.meas_plane.normal;
      const double s = nc.dot(nm) < 0.0 ? -1.0 : 1.0;
      const Eigen::Matrix<double, 3, 2> Bm = tangent_basis(nm);
      const double wa = 1.0 / th.plane_angle_rad();
      const double wd = 1.0 / th.sigma_3d(std::abs(c.meas_plane.offset));
      b.r.head<2>() = wa * s * (Bm.transpose() * nc);
      b.r(2) = wd * (s * dc - c.meas_plane.offset);
      if (with_jacobians) {
        b.J_pose.topLeftCorner<2, 3>() = wa * s * Bm.transpose() * R.transpose() * skew(nl);
        b.J_pose.block<1, 3>(2, 3) = wd * s * nl.transpose();
        const Eigen::Matrix<double, 3, 2> Bl = tangent_basis(nl);
        b.J_landmark.topLeftCorner<2, 2>() = wa * s * Bm.transpose() * R.transpose() * Bl;
        b.J_landmark.block<1, 2>(2, 0) = wd * s * t.transpose() * Bl;
        b.J_landmark(2, 2) = wd * s;
      }
      break;
    }
  }
  return b;
}

PlaneEq plane_boxplus(const PlaneEq& plane, const Vec3& delta) {
  const Vec3 n = (plane.normal + tangent_basis(plane.normal) * delta.head<2>()).normalized();
  return PlaneEq{n, plane.offset + delta(2)};
}

}  // namespace jslam
