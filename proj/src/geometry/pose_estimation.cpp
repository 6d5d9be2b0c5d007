#include "jslam/geometry/pose_estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "jslam/common/error.hpp"
#include "jslam/geometry/residuals.hpp"

namespace jslam {
namespace {

constexpr double kRotationRankTol = 1e-6;
constexpr double kTranslationRankTol = 1e-6;

struct Candidate {
  Pose pose;
  double residual = std::numeric_limits<double>::infinity();
};

// Solves one sign assignment; returns false when degenerate.
bool solve_with_signs(std::span<const Correspondence> corrs, const std::vector<double>& signs,
                      Candidate& out) {
  std::vector<Vec3> meas_pts, lm_pts;
  for (const auto& c : corrs) {
    if (c.kind == CorrespondenceKind::PointPoint) {
      meas_pts.push_back(c.meas_point);
      lm_pts.push_back(c.lm_point);
    }
  }

  Mat3 H = Mat3::Zero();
  if (meas_pts.size() >= 2) {
    Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
    for (size_t i = 0; i < meas_pts.size(); ++i) {
      ca += meas_pts[i];
      cb += lm_pts[i];
    }
    ca /= static_cast<double>(meas_pts.size());
    cb /= static_cast<double>(meas_pts.size());
    for (size_t i = 0; i < meas_pts.size(); ++i) H += (meas_pts[i] - ca) * (lm_pts[i] - cb).transpose();
  }
  size_t plane_idx = 0;
  for (const auto& c : corrs) {
    if (c.kind != CorrespondenceKind::PlanePlane) continue;
    H += (signs[plane_idx++] * c.meas_plane.normal) * c.lm_plane.normal.transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) < kRotationRankTol * sv(0)) return false;
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 R = svd.matrixV() * D * svd.matrixU().transpose();

  // translation rows
  Eigen::Matrix<double, Eigen::Dynamic, 3> A(0, 3);
  Eigen::VectorXd rhs(0);
  auto append = [&](const Eigen::Matrix<double, Eigen::Dynamic, 3>& rows, const Eigen::VectorXd& b) {
    const auto n = A.rows();
    A.conservativeResize(n + rows.rows(), 3);
    rhs.conservativeResize(n + b.size());
    A.bottomRows(rows.rows()) = rows;
    rhs.tail(b.size()) = b;
  };
  plane_idx = 0;
  for (const auto& c : corrs) {
    if (c.kind == CorrespondenceKind::PointPoint) {
      append(Mat3::Identity(), c.lm_point - R * c.meas_point);
    } else {
      const double s = signs[plane_idx++];
      const Vec3 n = s * (R * c.meas_plane.normal);
      Eigen::VectorXd b(1);
      b(0) = s * c.meas_plane.offset - c.lm_plane.offset;
      append(n.transpose(), b);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> tsvd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto tsv = tsvd.singularValues();
  if (tsv.size() < 3 || !(tsv(0) > 0.0) || tsv(2) < kTranslationRankTol * tsv(0)) return false;
  const Vec3 t = tsvd.solve(rhs);

  double residual = 0.0;
  plane_idx = 0;
  for (const auto& c : corrs) {
    if (c.kind == CorrespondenceKind::PointPoint) {
      residual += (R * c.meas_point + t - c.lm_point).squaredNorm();
    } else {
      const double s = signs[plane_idx++];
      const Vec3 n = R * c.meas_plane.normal;
      const double d = c.meas_plane.offset - n.dot(t);
      residual += (s * n - c.lm_plane.normal).squaredNorm();
      residual += (s * d - c.lm_plane.offset) * (s * d - c.lm_plane.offset);
    }
  }
  out.pose = Pose(R, t);
  out.residual = residual;
  return true;
}

}  // namespace

Pose estimate_pose_minimal(std::span<const Correspondence> corrs) {
  if (corrs.size() != 3) throw DegenerateConfiguration("minimal pose needs exactly 3 correspondences");
  int planes = 0;
  for (const auto& c : corrs) {
    if (c.kind == CorrespondenceKind::PixelPoint)
      throw KindMismatch("pixel-point pairs are not used in minimal samples");
    if (c.kind == CorrespondenceKind::PlanePlane) ++planes;
  }

  Candidate best;
  bool found = false;
  std::vector<double> signs(planes);
  for (int mask = 0; mask < (1 << planes); ++mask) {
    for (int k = 0; k < planes; ++k) signs[k] = (mask >> k) & 1 ? -1.0 : 1.0;
    Candidate cand;
    if (solve_with_signs(corrs, signs, cand) && cand.residual < best.residual) {
      best = cand;
      found = true;
    }
  }
  if (!found) throw DegenerateConfiguration("collinear, parallel or rank-deficient sample");
  return best.pose;
}

double pose_cost(std::span<const Correspondence> corrs, const Pose& T, const CameraIntrinsics& K,
                 const InlierThresholds& th) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    const ResidualBlock b = evaluate_residual(c, T, K, th, false);
    cost += b.valid ? b.squared_norm() : kInvalidResidualCost;
  }
  return cost;
}

RefinementResult refine_pose_least_squares(std::span<const Correspondence> corrs, const Pose& init,
                                           const CameraIntrinsics& K, const InlierThresholds& th,
                                           const RefinementOptions& opts) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  if (corrs.size() < 3) throw DegenerateConfiguration("refinement needs at least 3 correspondences");

  auto linearize = [&](const Pose& T, Mat6& H, Vec6& g) {
    H.setZero();
    g.setZero();
    double cost = 0.0;
    for (const auto& c : corrs) {
      const ResidualBlock b = evaluate_residual(c, T, K, th, true);
      if (!b.valid) {
        cost += kInvalidResidualCost;
        continue;
      }
      const auto J = b.J_pose.topRows(b.dim);
      const auto r = b.r.head(b.dim);
      H.noalias() += J.transpose() * J;
      g.noalias() += J.transpose() * r;
      cost += r.squaredNorm();
    }
    return cost;
  };

  RefinementResult res;
  res.pose = init;
  Mat6 H;
  Vec6 g;
  double cost = linearize(init, H, g);
  res.initial_cost = cost;

  {
    Eigen::SelfAdjointEigenSolver<Mat6> eig(H, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || eig.eigenvalues().minCoeff() < 1e-12 * hi)
      throw DegenerateConfiguration("pose is not observable from the correspondences");
  }

  double lambda = 1e-6;
  for (int it = 0; it < opts.max_iterations && cost > 0.0; ++it) {
    bool accepted = false;
    double new_cost = cost;
    Pose candidate = res.pose;
    while (lambda < 1e12) {
      Mat6 A = H;
      A.diagonal() += lambda * H.diagonal();
      const Vec6 delta = A.ldlt().solve(-g);
      candidate = res.pose.boxplus(delta);
      new_cost = pose_cost(corrs, candidate, K, th);
      if (new_cost < cost) {
        accepted = true;
        lambda = std::max(lambda * 0.1, 1e-12);
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
    const double decrease = cost - new_cost;
    res.pose = candidate;
    ++res.iterations;
    cost = linearize(res.pose, H, g);
    if (decrease < opts.min_cost_decrease) break;
  }
  res.final_cost = cost;
  return res;
}

}  // namespace jslam
