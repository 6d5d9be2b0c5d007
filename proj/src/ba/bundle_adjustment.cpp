#include "jslam/ba/bundle_adjustment.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "jslam/common/error.hpp"
#include "jslam/geometry/residuals.hpp"

namespace jslam {

namespace {
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
}  // namespace

int BaProblem::residual_rows() const {
  int rows = 0;
  for (const auto& r : residuals) rows += residual_dim(r.kind);
  return rows;
}

Correspondence BaProblem::correspondence(const BaResidual& r) const {
  switch (r.kind) {
    case CorrespondenceKind::PointPoint: return Correspondence::point_point(r.meas_point, points[r.landmark]);
    case CorrespondenceKind::PixelPoint: return Correspondence::pixel_point(r.meas_pixel, points[r.landmark]);
    case CorrespondenceKind::PlanePlane: return Correspondence::plane_plane(r.meas_plane, planes[r.landmark]);
  }
  return {};
}

double BaProblem::cost() const {
  double c = 0.0;
  for (const auto& r : residuals) {
    const ResidualBlock b = evaluate_residual(correspondence(r), poses[r.keyframe], intrinsics[r.keyframe],
                                              thresholds, false);
    c += b.valid ? b.squared_norm() : kInvalidResidualCost;
  }
  return c;
}

BaProblem build_problem(const WorldMap& map, const InlierThresholds& th) {
  if (map.keyframes.empty()) throw EmptyMap("map " + std::to_string(map.id) + " has no keyframes");
  BaProblem p;
  p.map_id = map.id;
  p.base_version = map.version;
  p.thresholds = th;
  for (const auto& kf : map.keyframes) {
    p.poses.push_back(kf.pose);
    p.intrinsics.push_back(kf.intrinsics);
  }
  for (const auto& l : map.landmarks) {
    const int slot = static_cast<int>(p.landmark_ids.size());
    p.landmark_ids.push_back(l.id);
    p.landmark_kinds.push_back(l.kind);
    p.points.push_back(l.position);
    p.planes.push_back(l.plane);
    for (const auto& o : l.observations) {
      const Measurement* m = map.keyframes[o.keyframe].find(o.measurement_id);
      if (!m) continue;
      BaResidual r;
      r.keyframe = o.keyframe;
      r.landmark = slot;
      r.measurement_id = m->id;
      switch (m->kind) {
        case FeatureKind::Point3D:
          r.kind = CorrespondenceKind::PointPoint;
          r.meas_point = m->position;
          break;
        case FeatureKind::Point2D:
          r.kind = CorrespondenceKind::PixelPoint;
          r.meas_pixel = m->pixel;
          break;
        case FeatureKind::Plane:
          r.kind = CorrespondenceKind::PlanePlane;
          r.meas_plane = m->plane;
          break;
      }
      p.residuals.push_back(r);
    }
  }
  return p;
}

BaReport optimize(BaProblem& p, const BaOptions& opts) {
  BaReport report;
  const int n_free = p.free_pose_blocks();
  const int n_lm = static_cast<int>(p.landmark_ids.size());
  const int dim_p = 6 * n_free;

  // Residuals grouped per landmark for the Schur complement.
  std::vector<std::vector<int>> by_landmark(n_lm);
  for (int i = 0; i < static_cast<int>(p.residuals.size()); ++i) by_landmark[p.residuals[i].landmark].push_back(i);

  Eigen::MatrixXd Hpp(dim_p, dim_p);
  Eigen::VectorXd gp(dim_p);
  std::vector<Mat3> Hll(n_lm);
  std::vector<Vec3> gl(n_lm);
  std::vector<Mat63> Hpl(p.residuals.size());  // per residual, pose k with its landmark
  std::vector<char> active(p.residuals.size());

  auto linearize = [&]() {
    Hpp.setZero();
    gp.setZero();
    double cost = 0.0;
    for (int j = 0; j < n_lm; ++j) {
      Hll[j].setZero();
      gl[j].setZero();
    }
    for (size_t i = 0; i < p.residuals.size(); ++i) {
      const BaResidual& res = p.residuals[i];
      const ResidualBlock b =
          evaluate_residual(p.correspondence(res), p.poses[res.keyframe], p.intrinsics[res.keyframe], p.thresholds, true);
      active[i] = b.valid;
      if (!b.valid) {
        cost += kInvalidResidualCost;
        continue;
      }
      const auto r = b.r.head(b.dim);
      const auto Jl = b.J_landmark.topRows(b.dim);
      cost += r.squaredNorm();
      Hll[res.landmark].noalias() += Jl.transpose() * Jl;
      gl[res.landmark].noalias() += Jl.transpose() * r;
      if (res.keyframe == 0) continue;
      const auto Jp = b.J_pose.topRows(b.dim);
      const int o = 6 * (res.keyframe - 1);
      Hpp.block<6, 6>(o, o).noalias() += Jp.transpose() * Jp;
      gp.segment<6>(o).noalias() += Jp.transpose() * r;
      Hpl[i].noalias() = Jp.transpose() * Jl;
    }
    return cost;
  };

  double cost = linearize();
  report.initial_cost = cost;
  double lambda = 1e-6;

  std::vector<Pose> poses_backup;
  std::vector<Vec3> points_backup;
  std::vector<PlaneEq> planes_backup;
  std::vector<Mat3> Vinv(n_lm);
  std::vector<Vec3> dl(n_lm);
  bool factorized = false;

  for (int it = 0; it < opts.max_iterations; ++it) {
    if (cost <= 0.0) {
      report.converged = true;
      break;
    }
    bool accepted = false;
    double new_cost = cost;
    while (lambda < 1e12) {
      // Reduced camera system S dp = -b.
      Eigen::MatrixXd S = Hpp;
      for (int k = 0; k < dim_p; ++k) S(k, k) += lambda * std::max(Hpp(k, k), 1e-9);
      Eigen::VectorXd b = gp;
      bool ok = true;
      for (int j = 0; j < n_lm; ++j) {
        Mat3 V = Hll[j];
        for (int k = 0; k < 3; ++k) V(k, k) += lambda * std::max(Hll[j](k, k), 1e-9);
        Eigen::LDLT<Mat3> ldlt(V);
        if (ldlt.info() != Eigen::Success) {
          ok = false;
          break;
        }
        Vinv[j] = ldlt.solve(Mat3::Identity());
        const auto& rs = by_landmark[j];
        for (int a : rs) {
          const int ka = p.residuals[a].keyframe;
          if (ka == 0 || !active[a]) continue;
          const Mat63 WV = Hpl[a] * Vinv[j];
          b.segment<6>(6 * (ka - 1)).noalias() -= WV * gl[j];
          for (int c : rs) {
            const int kc = p.residuals[c].keyframe;
            if (kc == 0 || !active[c]) continue;
            S.block<6, 6>(6 * (ka - 1), 6 * (kc - 1)).noalias() -= WV * Hpl[c].transpose();
          }
        }
      }
      Eigen::VectorXd dp = Eigen::VectorXd::Zero(dim_p);
      if (ok && dim_p > 0) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
        if (ldlt.info() != Eigen::Success) {
          ok = false;
        } else {
          dp = ldlt.solve(-b);
          ok = dp.allFinite();
        }
      }
      if (!ok) {
        lambda *= 10.0;
        continue;
      }
      factorized = true;
      for (int j = 0; j < n_lm; ++j) {
        Vec3 rhs = -gl[j];
        for (int a : by_landmark[j]) {
          const int ka = p.residuals[a].keyframe;
          if (ka == 0 || !active[a]) continue;
          rhs.noalias() -= Hpl[a].transpose() * dp.segment<6>(6 * (ka - 1));
        }
        dl[j] = Vinv[j] * rhs;
      }

      poses_backup = p.poses;
      points_backup = p.points;
      planes_backup = p.planes;
      for (int k = 1; k < static_cast<int>(p.poses.size()); ++k)
        p.poses[k] = p.poses[k].boxplus(dp.segment<6>(6 * (k - 1)));
      for (int j = 0; j < n_lm; ++j) {
        if (p.landmark_kinds[j] == FeatureKind::Plane)
          p.planes[j] = plane_boxplus(p.planes[j], dl[j]);
        else
          p.points[j] += dl[j];
      }
      new_cost = p.cost();
      if (new_cost < cost) {
        accepted = true;
        lambda = std::max(lambda * 0.1, 1e-12);
        break;
      }
      p.poses = poses_backup;
      p.points = points_backup;
      p.planes = planes_backup;
      lambda *= 10.0;
    }
    if (!accepted) {
      if (!factorized) throw NumericalFailure("bundle adjustment normal equations are singular");
      report.converged = true;
      break;
    }
    ++report.iterations;
    const double decrease = cost - new_cost;
    cost = linearize();
    if (decrease < opts.min_cost_decrease * std::max(1.0, cost)) {
      report.converged = true;
      break;
    }
  }
  for (int j = 0; j < n_lm; ++j)
    if (p.landmark_kinds[j] == FeatureKind::Plane) p.planes[j] = p.planes[j].canonicalized();
  report.final_cost = cost;
  return report;
}

void merge_refinement(WorldMap& live, const BaProblem& refined) {
  const size_t n = std::min(live.keyframes.size(), refined.poses.size());
  for (size_t k = 1; k < n; ++k) live.keyframes[k].pose = refined.poses[k];
  for (size_t j = 0; j < refined.landmark_ids.size(); ++j) {
    Landmark* l = live.find_landmark(refined.landmark_ids[j]);
    if (!l) continue;
    if (l->kind == FeatureKind::Plane)
      l->plane = refined.planes[j].canonicalized();
    else
      l->position = refined.points[j];
  }
  ++live.version;
}

}  // namespace jslam
