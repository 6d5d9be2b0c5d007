#include <doctest.h>

#include <random>

#include "jslam/common/error.hpp"
#include "jslam/eval/evaluation.hpp"
#include "jslam/sim/run.hpp"

using namespace jslam;

namespace {

std::string scenario_path(const std::string& name) { return std::string(JSLAM_SCENARIO_DIR) + "/" + name + ".json"; }

Pose random_pose(std::mt19937_64& rng, double spread = 2.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Pose(quat_exp(Vec3(n(rng), n(rng), n(rng))), spread * Vec3(n(rng), n(rng), n(rng)));
}

std::vector<Pose> random_walk(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> step(0.0, 0.05);
  std::vector<Pose> out{random_pose(rng)};
  for (int i = 1; i < n; ++i)
    out.push_back(out.back() * Pose(quat_exp(Vec3(step(rng), step(rng), step(rng))),
                                    Vec3(step(rng), step(rng), step(rng))));
  return out;
}

// One frame: measurements 0..n-1 with the given origins (entity == origin).
FrameTruth labeled_frame(int index, const std::vector<int>& origins) {
  FrameTruth f;
  f.frame_index = index;
  for (size_t i = 0; i < origins.size(); ++i)
    f.measurements.push_back({static_cast<int>(i), origins[i], origins[i], static_cast<int>(i)});
  return f;
}

FrameOutcome assigned(int index, const std::map<int, std::vector<int>>& partition, std::vector<int> failed = {}) {
  FrameOutcome o;
  o.frame_index = index;
  o.partition = partition;
  for (const auto& [id, cell] : partition) {
    RegistrationResult r;
    r.status = RegistrationStatus::Success;
    r.pose = Pose::identity();
    o.results[id] = r;
  }
  for (int id : failed) o.results[id] = RegistrationResult::failure(FailureReason::LowInlierRatio, RegistrationSource::FrameBased);
  return o;
}

std::vector<int> ids(int a, int b) {
  std::vector<int> v;
  for (int i = a; i < b; ++i) v.push_back(i);
  return v;
}

}  // namespace

TEST_CASE("trajectory_error") {
  std::mt19937_64 rng(11);
  const std::vector<Pose> truth = random_walk(rng, 50);

  SUBCASE("identical trajectories") {
    const TrajectoryError e = trajectory_error(truth, truth);
    CHECK(e.ate_rmse < 1e-12);
    CHECK(e.rot_rmse < 1e-9);
  }
  SUBCASE("invariant under a global rigid pre-transform") {
    for (int trial = 0; trial < 20; ++trial) {
      const Pose G = random_pose(rng, 10.0);
      std::vector<Pose> est;
      for (const Pose& p : truth) est.push_back(G * p);
      const TrajectoryError e = trajectory_error(est, truth);
      CHECK(e.ate_rmse < 1e-9);
      CHECK(e.rot_rmse < 1e-7);
      CHECK((e.alignment.matrix() - G.inverse().matrix()).norm() < 1e-9);
    }
  }
  SUBCASE("a pure rotation about a straight-line path is still recovered") {
    std::vector<Pose> line, est;
    const Pose G(quat_exp(Vec3(0.5, 0, 0)), Vec3(0, 1, 0));  // rotation about the line itself
    for (int i = 0; i < 10; ++i) {
      line.push_back(Pose(quat_exp(Vec3(0, 0.1 * i, 0)), Vec3(0.1 * i, 0, 0)));
      est.push_back(G * line.back());
    }
    CHECK(trajectory_error(est, line).ate_rmse < 1e-9);
    CHECK(trajectory_error(est, line).rot_rmse < 1e-7);
  }
  SUBCASE("1 cm random offsets give an ATE near 1 cm") {
    // i.i.d. offsets of length 1 cm in uniformly random directions
    for (int seed = 0; seed < 20; ++seed) {
      std::mt19937_64 r(100 + seed);
      std::normal_distribution<double> n(0.0, 1.0);
      const std::vector<Pose> gt = random_walk(r, 100);
      std::vector<Pose> est;
      for (const Pose& p : gt) est.push_back(Pose(p.rotation(), p.translation() + 0.01 * Vec3(n(r), n(r), n(r)).normalized()));
      const double ate = trajectory_error(est, gt).ate_rmse;
      CHECK(ate >= 0.005);
      CHECK(ate <= 0.015);
      CHECK(trajectory_error(est, gt).rot_rmse < 0.2);  // alignment tilts slightly under translation noise
    }
  }
  SUBCASE("errors are non-negative, one per pose") {
    std::vector<Pose> est;
    for (const Pose& p : truth) est.push_back(p * random_pose(rng, 0.01));
    const TrajectoryError e = trajectory_error(est, truth);
    CHECK(e.translation_errors.size() == truth.size());
    for (size_t i = 0; i < truth.size(); ++i) {
      CHECK(e.translation_errors[i] >= 0.0);
      CHECK(e.rotation_errors[i] >= 0.0);
    }
  }
  SUBCASE("length checks") {
    CHECK_THROWS_AS(trajectory_error(std::span<const Pose>(truth).first(10), truth), LengthMismatch);
    CHECK_THROWS_AS(trajectory_error(std::span<const Pose>(truth).first(1), std::span<const Pose>(truth).first(1)),
                    LengthMismatch);
  }
}

TEST_CASE("classification_report") {
  GroundTruth truth;
  truth.object_label = {0, 1};
  std::vector<int> origins(100, 0);
  for (int i = 50; i < 100; ++i) origins[i] = 1;
  truth.frames = {labeled_frame(0, origins), labeled_frame(1, origins)};

  SUBCASE("perfect assignment") {
    const std::vector<FrameOutcome> out{assigned(0, {{0, ids(0, 50)}, {1, ids(50, 100)}}),
                                        assigned(1, {{0, ids(0, 50)}, {1, ids(50, 100)}})};
    const auto report = classification_report(out, truth, {{0, 0}, {1, 1}});
    for (const auto& m : report.maps) {
      CHECK(m.counts.precision() == 1.0);
      CHECK(m.counts.recall() == 1.0);
      CHECK(m.counts.f1() == 1.0);
      CHECK(m.counts.total() == 200);
      CHECK(m.frames_evaluated == 2);
    }
  }
  SUBCASE("static-only scene, everything static") {
    GroundTruth s;
    s.object_label = {0};
    s.frames = {labeled_frame(0, std::vector<int>(30, 0))};
    const auto report = classification_report(std::vector<FrameOutcome>{assigned(0, {{0, ids(0, 30)}})}, s, {{0, 0}});
    CHECK(report.find(0)->counts.precision() == 1.0);
  }
  SUBCASE("one object measurement among 100 assigned static") {
    GroundTruth t;
    t.object_label = {0, 1};
    t.frames = {labeled_frame(0, std::vector<int>(100, 1))};
    std::vector<int> obj = ids(1, 100);
    const auto report =
        classification_report(std::vector<FrameOutcome>{assigned(0, {{0, {0}}, {1, obj}})}, t, {{0, 0}, {1, 1}});
    CHECK(report.find(1)->counts.recall() == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(report.find(1)->counts.precision() == 1.0);
    CHECK(report.find(0)->counts.precision() == 0.0);
  }
  SUBCASE("frames where a map failed are excluded for that map only") {
    std::vector<int> wrong = ids(0, 100);
    const std::vector<FrameOutcome> out{assigned(0, {{0, ids(0, 50)}, {1, ids(50, 100)}}),
                                        assigned(1, {{0, wrong}}, {1})};
    const auto report = classification_report(out, truth, {{0, 0}, {1, 1}});
    CHECK(report.find(1)->frames_evaluated == 1);
    CHECK(report.find(1)->counts.recall() == 1.0);
    CHECK(report.find(0)->frames_evaluated == 2);
    CHECK(report.find(0)->counts.fp == 50);
  }
  SUBCASE("counts conserve and stay in range under random assignments") {
    std::mt19937_64 rng(3);
    std::vector<FrameOutcome> out;
    for (int f = 0; f < 2; ++f) {
      std::map<int, std::vector<int>> p{{0, {}}, {1, {}}, {2, {}}};
      for (int i = 0; i < 100; ++i) p[static_cast<int>(rng() % 3)].push_back(i);
      out.push_back(assigned(f, p));
    }
    const auto report = classification_report(out, truth, {{0, 0}, {1, 1}, {2, 1}});
    for (const auto& m : report.maps) {
      CHECK(m.counts.total() == 200);
      for (double v : {m.counts.precision(), m.counts.recall(), m.counts.f1()}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  SUBCASE("map origins follow the majority of assigned labels") {
    const std::vector<FrameOutcome> out{assigned(0, {{0, ids(0, 50)}, {1, ids(45, 100)}})};
    const auto origins_of = infer_map_origins(out, truth);
    CHECK(origins_of.at(0) == 0);
    CHECK(origins_of.at(1) == 1);
  }
}

TEST_CASE("map_purity") {
  GroundTruth truth;
  truth.object_label = {0, 1};
  std::vector<int> origins(100, 1);
  origins[7] = 0;
  truth.frames = {labeled_frame(3, origins)};

  WorldMap map;
  map.id = 1;
  map.kind = MapKind::Object;
  Keyframe kf;
  kf.frame_index = 3;
  map.keyframes.push_back(kf);
  for (int i = 0; i < 100; ++i) {
    Landmark l;
    l.id = i;
    l.observations.push_back({0, i});
    map.landmarks.push_back(l);
  }
  CHECK(map_purity(map, truth) == doctest::Approx(0.99).epsilon(1e-12));
  truth.frames[0].measurements[7].origin = 1;
  CHECK(map_purity(map, truth) == 1.0);
  map.landmarks.clear();
  CHECK_THROWS_AS(map_purity(map, truth), EmptyMap);
}

TEST_CASE("zero-noise desk and box: both maps are pure and exact") {
  const RunArtifacts run = run_sequence(load_scenario(scenario_path("desk_box")), SlamConfig{});
  std::vector<WorldMap> maps;
  for (const auto& m : run.maps) maps.push_back(*m);
  const RunMetrics metrics = evaluate_run(maps, run.trajectories, run.outcomes, run.truth);
  REQUIRE(metrics.maps.size() == 2);
  for (const auto& m : metrics.maps) {
    CAPTURE(m.map_id);
    CHECK(m.origin == m.map_id);
    REQUIRE(m.purity);
    CHECK(*m.purity == 1.0);
    REQUIRE(m.trajectory);
    CHECK(m.trajectory->ate_rmse < 1e-6);
    CHECK(m.registration_rate() == 1.0);
  }
}
