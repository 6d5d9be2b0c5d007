#include <doctest.h>

#include <random>

#include "jslam/geometry/pose_estimation.hpp"
#include "jslam/registration/registration.hpp"
#include "support/oracles.hpp"

using namespace jslam;

namespace {

const CameraIntrinsics kK;

Descriptor random_descriptor(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  DescriptorVector v;
  for (int i = 0; i < kDescriptorLength; ++i) v(i) = n(rng);
  return Descriptor(v);
}

Vec3 visible_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.8, 0.8), z(1.0, 3.0);
  const double depth = z(rng);
  return {u(rng) * depth * 0.5, u(rng) * depth * 0.4, depth};
}

// Correspondences whose first `n_in` pairs are exact under T and the rest random.
CorrespondenceList planted(const Pose& T, int n, int n_in, std::mt19937_64& rng) {
  CorrespondenceList out;
  for (int i = 0; i < n; ++i) {
    const Vec3 m = visible_point(rng);
    const Vec3 l = i < n_in ? Vec3(T * m) : Vec3(oracle::random_point(rng, 2.0));
    out.push_back(Correspondence::point_point(m, l, i, 1000 + i));
  }
  return out;
}

// A frame of points and planes, plus a map holding the same features as
// landmarks under `frame_in_map` (one keyframe at identity, one segment).
struct Scene {
  Frame frame;
  WorldMap map;
};

Scene make_scene(const Pose& frame_in_map, int n_points, std::mt19937_64& rng, int id_base = 0) {
  Scene s;
  s.map.kind = MapKind::Object;
  Keyframe kf;
  Segment seg{0, SegmentKind::DepthCluster, {}};
  MapSegment ms{0, 0, {}};
  for (int i = 0; i < n_points; ++i) {
    const Vec3 p = visible_point(rng);
    const Descriptor d = random_descriptor(rng);
    const int id = id_base + i;
    s.frame.measurements.push_back(Measurement::point3d(id, p, project(kK, p), d));
    Landmark l;
    l.id = id;
    l.kind = FeatureKind::Point3D;
    l.position = frame_in_map * p;
    l.descriptor = d;
    l.observations.push_back({0, id});
    s.map.landmarks.push_back(l);
    kf.measurements.push_back(Measurement::point3d(id, l.position, project(kK, p), d));
    seg.member_ids.push_back(id);
    ms.landmark_ids.push_back(id);
  }
  const Vec3 normals[3] = {Vec3(0, 0, 1), Vec3(1, 0, 0.2).normalized(), Vec3(0, 1, 0.3).normalized()};
  for (int j = 0; j < 3; ++j) {
    const int id = id_base + n_points + j;
    const PlaneEq pl = PlaneEq::through_point(normals[j], Vec3(0, 0, 2.0 + j));
    const Descriptor d = random_descriptor(rng);
    s.frame.measurements.push_back(Measurement::plane_measurement(id, pl, d));
    Landmark l;
    l.id = id;
    l.kind = FeatureKind::Plane;
    l.plane = transform_plane(frame_in_map, pl);
    l.descriptor = d;
    l.observations.push_back({0, id});
    s.map.landmarks.push_back(l);
    kf.measurements.push_back(Measurement::plane_measurement(id, l.plane, d));
    seg.member_ids.push_back(id);
    ms.landmark_ids.push_back(id);
  }
  s.frame.segments.push_back(seg);
  s.map.keyframes.push_back(kf);
  s.map.segments.push_back(ms);
  return s;
}

double rot_err(const Pose& a, const Pose& b) { return (a.inverse() * b).rotation_angle(); }
double trans_err(const Pose& a, const Pose& b) { return (a.translation() - b.translation()).norm(); }

void check_inliers_consistent(const RegistrationResult& r, const RansacConfig& cfg) {
  REQUIRE(r.ok());
  CHECK(r.inlier_ratio() >= cfg.success_inlier_ratio);
  for (const auto& c : r.inliers) CHECK(is_inlier(*r.pose, c, kK, cfg.thresholds));
}

}  // namespace

TEST_CASE("ransac_pose gates") {
  std::mt19937_64 rng(1);
  const Pose T = oracle::random_pose(rng, 1.0, 1.0);
  RansacConfig cfg;

  const auto nine = planted(T, 9, 9, rng);
  const auto r9 = ransac_pose(nine, kK, cfg);
  CHECK_FALSE(r9.ok());
  CHECK(r9.reason == FailureReason::TooFewMatches);
  CHECK_FALSE(r9.pose.has_value());

  const auto clean = planted(T, 50, 50, rng);
  const auto r50 = ransac_pose(clean, kK, cfg);
  check_inliers_consistent(r50, cfg);
  CHECK(rot_err(*r50.pose, T) < 1e-7);
  CHECK(trans_err(*r50.pose, T) < 1e-7);
  CHECK(r50.inlier_ids.size() == 50);

  const auto low = planted(T, 100, 35, rng);
  const auto r35 = ransac_pose(low, kK, cfg);
  CHECK_FALSE(r35.ok());
  CHECK(r35.reason == FailureReason::LowInlierRatio);
}

TEST_CASE("ransac_pose is deterministic for a seed") {
  std::mt19937_64 rng(2);
  const Pose T = oracle::random_pose(rng, 1.0, 1.0);
  const auto corrs = planted(T, 80, 50, rng);
  RansacConfig cfg;
  cfg.rng_seed = 17;
  const auto a = ransac_pose(corrs, kK, cfg), b = ransac_pose(corrs, kK, cfg);
  REQUIRE(a.ok());
  CHECK(a.inlier_ids == b.inlier_ids);
  CHECK(a.pose->matrix() == b.pose->matrix());
}

TEST_CASE("ransac_pose matches least squares on the true inlier set") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose T = oracle::random_pose(rng, 1.0, 1.0);
    const auto corrs = planted(T, 60, 40, rng);
    RansacConfig cfg;
    cfg.rng_seed = trial;
    const auto r = ransac_pose(corrs, kK, cfg);
    check_inliers_consistent(r, cfg);
    const CorrespondenceList truth(corrs.begin(), corrs.begin() + 40);
    const Pose oracle_pose = oracle::horn_absolute_orientation(
        [&] { std::vector<Vec3> v; for (auto& c : truth) v.push_back(c.meas_point); return v; }(),
        [&] { std::vector<Vec3> v; for (auto& c : truth) v.push_back(c.lm_point); return v; }());
    CHECK(rot_err(*r.pose, oracle_pose) < 1e-7);
    CHECK(trans_err(*r.pose, oracle_pose) < 1e-7);
  }
}

TEST_CASE("register_frame") {
  std::mt19937_64 rng(4);
  RansacConfig cfg;
  SUBCASE("self registration is identity") {
    Scene s = make_scene(Pose::identity(), 60, rng);
    const auto r = register_frame(s.frame, s.map, 5, cfg);
    check_inliers_consistent(r, cfg);
    CHECK(r.pose->rotation_angle() < 1e-9);
    CHECK(r.pose->translation().norm() < 1e-9);
    CHECK(r.source == RegistrationSource::FrameBased);
  }
  SUBCASE("moved frame recovers the pose") {
    const Pose T = oracle::random_pose(rng, 0.5, 0.5);
    Scene s = make_scene(T, 60, rng);
    const auto r = register_frame(s.frame, s.map, 5, cfg);
    check_inliers_consistent(r, cfg);
    CHECK(rot_err(*r.pose, T) < 1e-9);
    CHECK(trans_err(*r.pose, T) < 1e-9);
  }
  SUBCASE("unrelated scene fails") {
    Scene a = make_scene(Pose::identity(), 60, rng);
    Scene b = make_scene(Pose::identity(), 60, rng);
    CHECK_FALSE(register_frame(a.frame, b.map, 5, cfg).ok());
  }
}

TEST_CASE("register_segment and prediction refinement") {
  std::mt19937_64 rng(5);
  RansacConfig cfg;
  const Pose T = oracle::random_pose(rng, 0.5, 0.5);
  Scene s = make_scene(T, 40, rng);

  const auto r = register_segment(s.frame.segments[0], s.frame, s.map, cfg);
  check_inliers_consistent(r, cfg);
  CHECK(r.source == RegistrationSource::SegmentBased);
  CHECK(r.matched_segment_ids == std::vector<int>{0});
  CHECK(rot_err(*r.pose, T) < 1e-9);
  CHECK(trans_err(*r.pose, T) < 1e-9);

  SUBCASE("inliers outside the segment are found") {
    // Second scene's features appended as unsegmented 2D points of the same map.
    Frame f = s.frame;
    WorldMap m = s.map;
    for (int i = 0; i < 10; ++i) {
      const Vec3 p = visible_point(rng);
      const Descriptor d = random_descriptor(rng);
      f.measurements.push_back(Measurement::point2d(500 + i, project(kK, p), d));
      Landmark l;
      l.id = 500 + i;
      l.position = T * p;
      l.descriptor = d;
      l.observations.push_back({0, 0});
      m.landmarks.push_back(l);
    }
    const auto rr = register_segment(f.segments[0], f, m, cfg);
    check_inliers_consistent(rr, cfg);
    for (int i = 0; i < 10; ++i) CHECK(rr.is_inlier(500 + i));
  }

  SUBCASE("static segment against object map fails") {
    Scene other = make_scene(Pose::identity(), 40, rng, 1000);
    const auto bad = register_segment(other.frame.segments[0], other.frame, s.map, cfg);
    CHECK_FALSE(bad.ok());
    CHECK(bad.reason == FailureReason::NoCandidateVerified);
  }

  SUBCASE("prediction off by one meter") {
    const Pose off = Pose(Mat3::Identity(), Vec3(1, 0, 0)) * T;
    const auto bad = refine_with_prediction(s.frame, s.map, off, cfg);
    CHECK((!bad.ok() || bad.inlier_ratio() < 0.4));
  }

  SUBCASE("refinement never increases the cost of the prediction") {
    const Pose near = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(0.01, Vec3::UnitY())), Vec3(0.005, 0, 0)) * T;
    const auto rr = refine_with_prediction(s.frame, s.map, near, cfg);
    REQUIRE(rr.ok());
    CorrespondenceList all;
    for (const auto& m : s.frame.measurements) all.push_back(*make_correspondence(m, *s.map.find_landmark(m.id)));
    CHECK(pose_cost(all, *rr.pose, kK, cfg.thresholds) <= pose_cost(all, near, kK, cfg.thresholds));
  }
}

TEST_CASE("fuse_results") {
  const RansacConfig cfg;
  // Both successes place their inliers consistently with a shift of 2 m in x.
  const Vec3 a(0, 0, 1), b(0.5, 0, 1), c(0, 0.5, 1);
  const Vec3 dx(2, 0, 0);
  RegistrationResult frame_ok;
  frame_ok.status = RegistrationStatus::Success;
  frame_ok.pose = Pose(Mat3::Identity(), Vec3(1.999, 0, 0));
  frame_ok.inlier_ids = {1, 2};
  frame_ok.inliers = {Correspondence::point_point(a, a + dx, 1, 11), Correspondence::point_point(b, b + dx, 2, 12)};
  frame_ok.matched_ids = {1, 2};
  frame_ok.match_count = 2;

  RegistrationResult seg_ok;
  seg_ok.status = RegistrationStatus::Success;
  seg_ok.source = RegistrationSource::SegmentBased;
  seg_ok.pose = Pose(Mat3::Identity(), Vec3(2, 0, 0));
  seg_ok.inlier_ids = {2, 3};
  seg_ok.inliers = {Correspondence::point_point(b, b + dx, 2, 12), Correspondence::point_point(c, c + dx, 3, 13)};
  seg_ok.matched_segment_ids = {4};
  seg_ok.matched_ids = {2, 3};
  seg_ok.match_count = 2;

  const auto fail = RegistrationResult::failure(FailureReason::LowInlierRatio, RegistrationSource::FrameBased);
  const auto seg_fail = RegistrationResult::failure(FailureReason::NoCandidateVerified, RegistrationSource::SegmentBased);

  const std::vector<RegistrationResult> segs{seg_fail, seg_ok};
  const auto both = fuse_results(frame_ok, segs, kK, cfg);
  REQUIRE(both.ok());
  CHECK(both.pose->translation().x() == 2.0);
  CHECK(both.inlier_ids == std::vector<int>{1, 2, 3});
  CHECK(both.matched_segment_ids == std::vector<int>{4});
  CHECK(both.source == RegistrationSource::SegmentBased);

  const std::vector<RegistrationResult> none{seg_fail};
  const auto frame_only = fuse_results(frame_ok, none, kK, cfg);
  CHECK(frame_only.ok());
  CHECK(frame_only.pose->translation().x() == 1.999);
  CHECK(frame_only.source == RegistrationSource::FrameBased);

  CHECK_FALSE(fuse_results(fail, none, kK, cfg).ok());

  SUBCASE("a success that disagrees with the winning pose is dropped") {
    RegistrationResult stray = seg_ok;
    stray.pose = Pose(Mat3::Identity(), Vec3(-3, 0, 0));
    stray.inlier_ids = {7, 8, 9};
    stray.inliers = {Correspondence::point_point(a, a - Vec3(3, 0, 0), 7, 17),
                     Correspondence::point_point(b, b - Vec3(3, 0, 0), 8, 18),
                     Correspondence::point_point(c, c - Vec3(3, 0, 0), 9, 19)};
    stray.matched_segment_ids = {5};
    RegistrationResult winner = seg_ok;
    winner.inlier_ids = {1, 2, 3, 4};
    winner.inliers.push_back(Correspondence::point_point(Vec3(0.2, 0.2, 1), Vec3(2.2, 0.2, 1), 4, 14));
    winner.inliers.insert(winner.inliers.begin(), Correspondence::point_point(a, a + dx, 1, 11));
    const std::vector<RegistrationResult> mixed{stray, winner};
    const auto fused = fuse_results(fail, mixed, kK, cfg);
    REQUIRE(fused.ok());
    CHECK(fused.inlier_ids == std::vector<int>{1, 2, 3, 4});
    CHECK(fused.matched_segment_ids == std::vector<int>{4});
  }
}
