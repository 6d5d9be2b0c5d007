#pragma once

#include <cstdint>
#include <vector>

#include "jslam/geometry/correspondence.hpp"
#include "jslam/scene/types.hpp"

namespace jslam {

// One observation residual: a keyframe measurement tied to a landmark slot.
struct BaResidual {
  int keyframe = 0;
  int landmark = 0;  // index into BaProblem landmark arrays
  int measurement_id = -1;
  CorrespondenceKind kind = CorrespondenceKind::PointPoint;
  Vec3 meas_point = Vec3::Zero();
  Pixel meas_pixel;
  PlaneEq meas_plane;
};

// Variables and residuals of one map. Keyframe 0 is the gauge and never moves.
struct BaProblem {
  int map_id = 0;
  std::uint64_t base_version = 0;
  InlierThresholds thresholds;

  std::vector<Pose> poses;  // per keyframe
  std::vector<CameraIntrinsics> intrinsics;
  std::vector<int> landmark_ids;
  std::vector<FeatureKind> landmark_kinds;
  std::vector<Vec3> points;    // valid where kind == Point3D
  std::vector<PlaneEq> planes; // valid where kind == Plane
  std::vector<BaResidual> residuals;

  int free_pose_blocks() const { return poses.empty() ? 0 : static_cast<int>(poses.size()) - 1; }
  /// Number of scalar residual rows.
  int residual_rows() const;
  /// Sum of squared weighted residuals at the current values.
  double cost() const;
  Correspondence correspondence(const BaResidual& r) const;
};

struct BaOptions {
  int max_iterations = 100;
  double min_cost_decrease = 1e-12;
};

struct BaReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;  // accepted steps
  bool converged = false;
};

/// Throws EmptyMap when the map has no keyframes.
BaProblem build_problem(const WorldMap& map, const InlierThresholds& th = {});

/// Levenberg-Marquardt with the landmark blocks eliminated by Schur
/// complement. Refined values are written back into `problem`; plane normals
/// stay on the unit sphere through tangent increments. Throws NumericalFailure
/// when the damped reduced system cannot be factorized.
BaReport optimize(BaProblem& problem, const BaOptions& opts = {});

/// Overwrites keyframe poses and landmark geometry present in `refined`;
/// anything added after the snapshot keeps its current value. Bumps the version.
void merge_refinement(WorldMap& live, const BaProblem& refined);

}  // namespace jslam
