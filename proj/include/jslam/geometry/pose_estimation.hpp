#pragma once

#include <span>

#include "jslam/geometry/correspondence.hpp"

namespace jslam {

/// Closed-form pose from exactly three point-point / plane-plane pairs.
///
/// Rotation: orthogonal Procrustes over direction constraints (centered point
/// positions and plane normals). Translation: linear least squares over point
/// positions and plane offsets. Plane sign ambiguity is resolved by trying each
/// sign assignment and keeping the one with the smallest constraint residual.
///
/// Throws DegenerateConfiguration for collinear points, parallel normals or a
/// rank-deficient translation system, and KindMismatch for pixel pairs.
Pose estimate_pose_minimal(std::span<const Correspondence> corrs);

struct RefinementOptions {
  int max_iterations = 50;
  double min_cost_decrease = 1e-10;
};

struct RefinementResult {
  Pose pose;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;  // accepted steps
};

/// Sum of squared weighted residuals.
double pose_cost(std::span<const Correspondence> corrs, const Pose& T,
                 const CameraIntrinsics& K, const InlierThresholds& th);

/// Levenberg-Marquardt over the weighted residuals of all kinds. Only
/// cost-decreasing steps are accepted, so final_cost <= initial_cost.
/// Throws DegenerateConfiguration if fewer than 3 pairs or the normal
/// equations are rank deficient at `init`.
RefinementResult refine_pose_least_squares(std::span<const Correspondence> corrs, const Pose& init,
                                           const CameraIntrinsics& K, const InlierThresholds& th,
                                           const RefinementOptions& opts = {});

}  // namespace jslam
