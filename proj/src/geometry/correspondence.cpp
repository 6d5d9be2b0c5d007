#include "jslam/geometry/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace jslam {

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Point3D: return "point3d";
    case FeatureKind::Point2D: return "point2d";
    case FeatureKind::Plane: return "plane";
  }
  return "?";
}

double InlierThresholds::sigma_3d(double depth) const {
  return std::max(sigma_floor, 3.0 * depth_noise_coeff * depth * depth);
}

double InlierThresholds::plane_angle_rad() const {
  return plane_angle_deg * std::numbers::pi / 180.0;
}

Correspondence Correspondence::point_point(const Vec3& meas, const Vec3& lm, int mid, int lid) {
  Correspondence c;
  c.kind = CorrespondenceKind::PointPoint;
  c.meas_point = meas;
  c.lm_point = lm;
  c.measurement_id = mid;
  c.landmark_id = lid;
  return c;
}

Correspondence Correspondence::pixel_point(const Pixel& meas, const Vec3& lm, int mid, int lid) {
  Correspondence c;
  c.kind = CorrespondenceKind::PixelPoint;
  c.meas_pixel = meas;
  c.lm_point = lm;
  c.measurement_id = mid;
  c.landmark_id = lid;
  return c;
}

Correspondence Correspondence::plane_plane(const PlaneEq& meas, const PlaneEq& lm, int mid, int lid) {
  Correspondence c;
  c.kind = CorrespondenceKind::PlanePlane;
  c.meas_plane = meas;
  c.lm_plane = lm;
  c.measurement_id = mid;
  c.landmark_id = lid;
  return c;
}

FeatureDistance feature_distance(const Pose& T, const Correspondence& c, const CameraIntrinsics& K) {
  FeatureDistance d;
  d.kind = c.kind;
  switch (c.kind) {
    case CorrespondenceKind::PointPoint:
      d.value = (T * c.meas_point - c.lm_point).norm();
      break;
    case CorrespondenceKind::PixelPoint: {
      const Vec3 in_frame = T.inverse() * c.lm_point;
      if (in_frame.z() <= 1e-9) {
        d.value = std::numeric_limits<double>::infinity();
      } else {
        const Pixel px = project(K, in_frame);
        d.value = (px.vec() - c.meas_pixel.vec()).norm();
      }
      break;
    }
    case CorrespondenceKind::PlanePlane: {
      const PlaneEq moved = transform_plane(T, c.meas_plane);
      const double dot = moved.normal.dot(c.lm_plane.normal);
      // sign-invariant: align the transformed measurement with the landmark
      const double s = dot < 0.0 ? -1.0 : 1.0;
      const double cross = moved.normal.cross(c.lm_plane.normal).norm();
      d.angle_deg = std::atan2(cross, s * dot) * 180.0 / std::numbers::pi;
      d.offset = std::abs(s * moved.offset - c.lm_plane.offset);
      d.value = d.angle_deg;
      break;
    }
  }
  return d;
}

bool within_threshold(const FeatureDistance& d, const Correspondence& c,
                      const InlierThresholds& th, double scale) {
  switch (c.kind) {
    case CorrespondenceKind::PointPoint:
      return d.value < scale * th.sigma_3d(c.meas_point.z());
    case CorrespondenceKind::PixelPoint:
      return d.value < scale * th.reproj_px;
    case CorrespondenceKind::PlanePlane:
      return d.angle_deg < scale * th.plane_angle_deg &&
             d.offset < scale * th.sigma_3d(std::abs(c.meas_plane.offset));
  }
  return false;
}

}  // namespace jslam
