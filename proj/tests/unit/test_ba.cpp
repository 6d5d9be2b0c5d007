#include <doctest.h>

#include <random>

#include "jslam/ba/bundle_adjustment.hpp"
#include "jslam/common/error.hpp"
#include "jslam/geometry/residuals.hpp"
#include "support/oracles.hpp"
#include "support/synthetic_map.hpp"

using namespace jslam;
using jslam::testing::make_synthetic_map;
using jslam::testing::SyntheticMapOptions;

namespace {

double rot_err(const Pose& a, const Pose& b) { return (a.inverse() * b).rotation_angle(); }
double trans_err(const Pose& a, const Pose& b) { return (a.translation() - b.translation()).norm(); }

Pose perturbation(std::mt19937_64& rng, double meters, double degrees) {
  const Vec3 axis = oracle::random_unit(rng);
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(degrees * M_PI / 180.0, axis)), meters * oracle::random_unit(rng));
}

}  // namespace

TEST_CASE("build_problem counts residuals") {
  SyntheticMapOptions o;
  o.keyframes = 1;
  o.points = 10;
  o.planes = false;
  const auto s = make_synthetic_map(o);
  REQUIRE(s.map.landmarks.size() == 10);
  const BaProblem p = build_problem(s.map);
  CHECK(p.residual_rows() == 30);
  CHECK(p.free_pose_blocks() == 0);

  SyntheticMapOptions o3;
  o3.keyframes = 3;
  o3.points = 0;
  const BaProblem planes = build_problem(make_synthetic_map(o3).map);
  CHECK(planes.residuals.size() == 9);  // three planes, each seen by three keyframes
  int on_first = 0;
  for (const auto& r : planes.residuals) on_first += r.landmark == 0 ? 1 : 0;
  CHECK(on_first == 3);

  CHECK_THROWS_AS(build_problem(WorldMap{}), EmptyMap);
}

TEST_CASE("noise-free map is a fixed point") {
  SyntheticMapOptions o;
  o.keyframes = 6;
  auto s = make_synthetic_map(o);
  BaProblem p = build_problem(s.map);
  CHECK(p.cost() < 1e-12);
  const auto before = p.poses;
  const BaReport rep = optimize(p);
  CHECK(rep.converged);
  CHECK(rep.final_cost <= rep.initial_cost);
  for (size_t k = 0; k < before.size(); ++k) CHECK(trans_err(before[k], p.poses[k]) < 1e-9);
}

TEST_CASE("perturbed keyframes are recovered") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    SyntheticMapOptions o;
    o.keyframes = 6;
    o.seed = 100 + trial;
    auto s = make_synthetic_map(o);
    for (size_t k = 1; k < s.map.keyframes.size(); ++k)
      s.map.keyframes[k].pose = perturbation(rng, 0.02, 2.0) * s.map.keyframes[k].pose;
    BaProblem p = build_problem(s.map);
    const Pose gauge = p.poses[0];
    const BaReport rep = optimize(p);
    CHECK(rep.final_cost < rep.initial_cost);
    CHECK(p.poses[0].matrix() == gauge.matrix());
    for (size_t k = 0; k < p.poses.size(); ++k) {
      CHECK(trans_err(p.poses[k], s.true_poses[k]) < 1e-4);
      CHECK(rot_err(p.poses[k], s.true_poses[k]) * 180.0 / M_PI < 1e-4);
    }
    for (size_t j = 0; j < p.landmark_ids.size(); ++j) {
      if (p.landmark_kinds[j] == FeatureKind::Plane) CHECK(std::abs(p.planes[j].normal.norm() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("cost is monotone on noisy maps") {
  SyntheticMapOptions o;
  o.keyframes = 5;
  o.point_noise = 0.01;
  o.pixel_noise = 0.5;
  o.plane_noise = 0.01;
  const auto s = make_synthetic_map(o);
  double previous = build_problem(s.map).cost();
  for (int iters = 1; iters <= 8; ++iters) {
    BaProblem p = build_problem(s.map);
    BaOptions opts;
    opts.max_iterations = iters;
    const BaReport rep = optimize(p, opts);
    CHECK(rep.final_cost <= rep.initial_cost);
    CHECK(rep.final_cost <= previous + 1e-12);
    CHECK(p.cost() == doctest::Approx(rep.final_cost).epsilon(1e-9));
    previous = rep.final_cost;
  }
}

TEST_CASE("problem Jacobians match finite differences") {
  SyntheticMapOptions o;
  o.keyframes = 4;
  o.point_noise = 0.02;
  o.pixel_noise = 1.0;
  o.plane_noise = 0.02;
  const auto s = make_synthetic_map(o);
  const BaProblem p = build_problem(s.map);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<size_t> pick(0, p.residuals.size() - 1);
  int checked = 0;
  double worst = 0.0;
  while (checked < 100) {
    const BaResidual& r = p.residuals[pick(rng)];
    const Correspondence c = p.correspondence(r);
    const Pose T = p.poses[r.keyframe];
    const auto& K = p.intrinsics[r.keyframe];
    const ResidualBlock b = evaluate_residual(c, T, K, p.thresholds, true);
    if (!b.valid) continue;
    const int dim = b.dim;
    const Eigen::MatrixXd Jp = oracle::central_difference(
        [&](const Eigen::VectorXd& d) {
          return Eigen::VectorXd(evaluate_residual(c, T.boxplus(d), K, p.thresholds, false).r.head(dim));
        },
        6, 1e-6);
    const Eigen::MatrixXd Jl = oracle::central_difference(
        [&](const Eigen::VectorXd& d) {
          Correspondence moved = c;
          if (c.kind == CorrespondenceKind::PlanePlane)
            moved.lm_plane = plane_boxplus(c.lm_plane, d);
          else
            moved.lm_point = c.lm_point + Vec3(d);
          return Eigen::VectorXd(evaluate_residual(moved, T, K, p.thresholds, false).r.head(dim));
        },
        3, 1e-6);
    const double ep = (Jp - b.J_pose.topRows(dim)).norm() / std::max(1e-8, Jp.norm());
    const double el = (Jl - b.J_landmark.topRows(dim)).norm() / std::max(1e-8, Jl.norm());
    worst = std::max({worst, ep, el});
    ++checked;
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("merge_refinement") {
  SyntheticMapOptions o;
  o.keyframes = 5;
  o.point_noise = 0.01;
  const auto s = make_synthetic_map(o);
  WorldMap live = s.map;
  const WorldMap other = s.map;
  BaProblem p = build_problem(live);
  optimize(p);

  SUBCASE("no new keyframes: map equals refined values") {
    merge_refinement(live, p);
    CHECK(live.version == s.map.version + 1);
    for (size_t k = 0; k < p.poses.size(); ++k) CHECK(live.keyframes[k].pose.matrix() == p.poses[k].matrix());
    for (size_t j = 0; j < p.landmark_ids.size(); ++j) {
      const Landmark* l = live.find_landmark(p.landmark_ids[j]);
      if (l->kind == FeatureKind::Point3D) CHECK(l->position == p.points[j]);
    }
    CHECK_NOTHROW(live.validate());
  }

  SUBCASE("keyframe and landmark added during optimization stay untouched") {
    Keyframe extra = live.keyframes.back();
    extra.pose = Pose(Mat3::Identity(), Vec3(9, 9, 9));
    live.keyframes.push_back(extra);
    Landmark late;
    late.id = 100000;
    late.position = Vec3(1, 2, 3);
    late.observations.push_back({5, extra.measurements.front().id});
    live.landmarks.push_back(late);
    merge_refinement(live, p);
    CHECK(live.keyframes.back().pose.translation() == Vec3(9, 9, 9));
    CHECK(live.landmarks.back().position == Vec3(1, 2, 3));
    for (size_t k = 0; k < p.poses.size(); ++k) CHECK(live.keyframes[k].pose.matrix() == p.poses[k].matrix());
  }

  // optimizing one map never touches another
  for (size_t k = 0; k < other.keyframes.size(); ++k)
    CHECK(other.keyframes[k].pose.matrix() == s.map.keyframes[k].pose.matrix());
}
