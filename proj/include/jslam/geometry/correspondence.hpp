#pragma once

#include <Eigen/Core>
#include <vector>

#include "jslam/geometry/pose.hpp"
#include "jslam/geometry/primitives.hpp"

namespace jslam {

enum class FeatureKind { Point3D, Point2D, Plane };

const char* to_string(FeatureKind kind);

enum class CorrespondenceKind { PointPoint, PixelPoint, PlanePlane };

/// Inlier thresholds shared by registration, refinement weighting and BA.
struct InlierThresholds {
  double depth_noise_coeff = 1.425e-3;  // sigma_Z(z) = coeff * z^2, meters
  double sigma_floor = 0.01;            // meters
  double reproj_px = 3.0;
  double plane_angle_deg = 10.0;

  /// max(1 cm, 3 sigma_Z(z)) in meters; also the plane offset threshold.
  double sigma_3d(double depth) const;
  double plane_angle_rad() const;
};

/// A measurement (frame coordinates) paired with a landmark (map coordinates).
/// Geometry is copied so solvers can run without the owning containers.
struct Correspondence {
  CorrespondenceKind kind = CorrespondenceKind::PointPoint;
  int measurement_id = -1;
  int landmark_id = -1;
  Vec3 meas_point = Vec3::Zero();
  Pixel meas_pixel;
  PlaneEq meas_plane;
  Vec3 lm_point = Vec3::Zero();
  PlaneEq lm_plane;

  static Correspondence point_point(const Vec3& meas, const Vec3& lm, int mid = -1, int lid = -1);
  static Correspondence pixel_point(const Pixel& meas, const Vec3& lm, int mid = -1, int lid = -1);
  static Correspondence plane_plane(const PlaneEq& meas, const PlaneEq& lm, int mid = -1, int lid = -1);

  bool usable_in_minimal_sample() const { return kind != CorrespondenceKind::PixelPoint; }
};

using CorrespondenceList = std::vector<Correspondence>;

/// d(T(p_m), p_l). For point-point `value` is meters, for pixel-point pixels.
/// Plane pairs report the normal angle (deg) and offset difference (m)
/// separately; `value` then holds the angle.
struct FeatureDistance {
  CorrespondenceKind kind = CorrespondenceKind::PointPoint;
  double value = 0.0;
  double angle_deg = 0.0;
  double offset = 0.0;
};

/// `T` is the frame-in-map pose.
FeatureDistance feature_distance(const Pose& T, const Correspondence& c, const CameraIntrinsics& K);

/// Inlier test with all thresholds multiplied by `scale`.
bool within_threshold(const FeatureDistance& d, const Correspondence& c,
                      const InlierThresholds& th, double scale = 1.0);

inline bool is_inlier(const Pose& T, const Correspondence& c, const CameraIntrinsics& K,
                      const InlierThresholds& th, double scale = 1.0) {
  return within_threshold(feature_distance(T, c, K), c, th, scale);
}

}  // namespace jslam
