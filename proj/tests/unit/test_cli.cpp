#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "jslam/cli/cli.hpp"
#include "jslam/common/error.hpp"

using namespace jslam;
namespace fs = std::filesystem;

namespace {

std::string scenario_path(const std::string& name) { return std::string(JSLAM_SCENARIO_DIR) + "/" + name + ".json"; }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("jslam_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "jslam");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// One clean desk+box run shared by the tests that only read it.
const fs::path& desk_box_dir() {
  static const fs::path dir = [] {
    const fs::path d = fresh_dir("desk_box");
    const Result r = cli({"run", "--scenario", scenario_path("desk_box"), "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("parameter overrides") {
  SlamConfig cfg;
  apply_override(cfg, "ransac.min_matches=12");
  CHECK(cfg.ransac.min_matches == 12);
  apply_override(cfg, "outlier_ratio_threshold=0.4");
  CHECK(cfg.detection.outlier_ratio_threshold == 0.4);
  apply_override(cfg, "ba.async=false");
  CHECK_FALSE(cfg.ba.async);
  apply_override(cfg, "rng_seed=18446744073709551615");
  CHECK(cfg.ransac.rng_seed == 18446744073709551615ull);
  apply_override(cfg, "keyframe_window=7");
  CHECK(cfg.keyframe_window == 7);

  const SlamConfig before = cfg;
  CHECK_THROWS_AS(apply_override(cfg, "no_such_field=1"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "min_matches=1.5"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "min_matches=ten"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "ba.enabled=1"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "confidence=nan"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "max_iterations=5"), ValidationError);  // ransac or ba
  CHECK_THROWS_AS(apply_override(cfg, "min_matches"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "success_inlier_ratio=1.5"), ValidationError);  // fails validation
  CHECK(format_config_json(cfg) == format_config_json(before));

  SUBCASE("every ransac and detection field is reachable") {
    const auto keys = override_keys();
    for (const char* k : {"ransac.min_matches", "ransac.success_inlier_ratio", "ransac.max_iterations",
                          "ransac.confidence", "ransac.depth_noise_coeff", "ransac.sigma_floor",
                          "ransac.reproj_threshold", "ransac.plane_angle_threshold", "ransac.rng_seed",
                          "detection.outlier_ratio_threshold", "detection.min_segment_size",
                          "detection.keyframe_translation", "detection.keyframe_rotation"}) {
      CAPTURE(k);
      CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());
    }
  }
}

TEST_CASE("run writes trajectories, clouds, growth log and manifest") {
  const fs::path& dir = desk_box_dir();
  for (const char* f : {"manifest.json", "maps.json", "outcomes.json", "ground_truth.json", "map_growth.csv",
                        "errors.log", "map_0_frames.tum", "map_0_keyframes.tum", "map_0.ply", "map_1_frames.tum",
                        "map_1_keyframes.tum", "map_1.ply"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / f));
  }
  CHECK_FALSE(fs::exists(dir / "map_2.ply"));
  const RunManifest m = parse_manifest_json(read_text(dir / "manifest.json"));
  CHECK(m.scenario_name == "desk_box");
  CHECK(m.map_ids == std::vector<int>{0, 1});
  CHECK(m.scenario_schema_version == kScenarioSchemaVersion);
  CHECK(read_text(dir / "errors.log").empty());
}

TEST_CASE("run input errors exit 1") {
  SUBCASE("bad scenario file names the offending line") {
    const fs::path dir = fresh_dir("bad_scenario");
    fs::create_directories(dir);
    std::string text = read_text(scenario_path("desk_box"));
    text.insert(text.find('\n') + 1, "  \"bogus_key\": 3,\n");
    write_text(dir / "bad.json", text);
    const Result r = cli({"run", "--scenario", (dir / "bad.json").string(), "--out", (dir / "out").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("line 2") != std::string::npos);
    CHECK(r.err.find("bogus_key") != std::string::npos);
    fs::remove_all(dir);
  }
  SUBCASE("missing scenario") {
    CHECK(cli({"run", "--scenario", "/nonexistent.json", "--out", fresh_dir("x").string()}).code == 1);
  }
  SUBCASE("unknown override") {
    const Result r = cli({"run", "--scenario", scenario_path("desk_box"), "--out", fresh_dir("x").string(), "--set",
                          "frobnicate=2"});
    CHECK(r.code == 1);
    CHECK(r.err.find("frobnicate") != std::string::npos);
  }
  SUBCASE("usage errors") {
    CHECK(cli({}).code == 1);
    CHECK(cli({"run", "--scenario", scenario_path("desk_box")}).code == 1);
    CHECK(cli({"dance"}).code == 1);
    CHECK(cli({"--help"}).code == 0);
  }
}

TEST_CASE("same seed twice gives identical outputs") {
  const fs::path a = fresh_dir("seed_a"), b = fresh_dir("seed_b");
  for (const auto& d : {a, b}) {
    const Result r = cli({"run", "--scenario", scenario_path("desk_box_noisy"), "--out", d.string(), "--seed", "7"});
    REQUIRE(r.code == 0);
    REQUIRE(cli({"evaluate", "--out", d.string()}).code == 0);
    REQUIRE(cli({"export", "--out", d.string(), "--maps", "0,1"}).code == 0);
  }
  const RunManifest m = parse_manifest_json(read_text(a / "manifest.json"));
  CHECK(m.seed == 7);
  std::vector<std::string> files = m.files;
  files.push_back("metrics.json");
  files.push_back("combined.ply");
  for (const auto& f : files) {
    CAPTURE(f);
    CHECK(read_text(a / f) == read_text(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("evaluate") {
  SUBCASE("a perfect run scores 1.0 everywhere") {
    const fs::path& dir = desk_box_dir();
    const Result r = cli({"evaluate", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("precision") != std::string::npos);
    const RunMetrics metrics = parse_metrics_json(read_text(dir / "metrics.json"));
    REQUIRE(metrics.maps.size() == 2);
    for (const auto& mm : metrics.maps) {
      CHECK(mm.classification.counts.precision() == 1.0);
      CHECK(mm.classification.counts.recall() == 1.0);
      CHECK(*mm.purity == 1.0);
      CHECK(mm.trajectory->ate_rmse < 1e-6);
    }
  }
  SUBCASE("missing trajectory file") {
    const fs::path dir = fresh_dir("missing_traj");
    fs::copy(desk_box_dir(), dir);
    fs::remove(dir / "map_1_frames.tum");
    const Result r = cli({"evaluate", "--out", dir.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("map_1_frames.tum") != std::string::npos);
    fs::remove_all(dir);
  }
  SUBCASE("missing run directory") { CHECK(cli({"evaluate", "--out", "/nonexistent/run"}).code == 1); }
}

TEST_CASE("export") {
  const fs::path& dir = desk_box_dir();

  SUBCASE("static map alone") {
    const Result r = cli({"export", "--out", dir.string(), "--maps", "0", "--file", (dir / "static.ply").string()});
    REQUIRE(r.code == 0);
    const auto cloud = parse_ply(read_text(dir / "static.ply"));
    CHECK(cloud == parse_ply(read_text(dir / "map_0.ply")));
  }
  SUBCASE("unknown map id") {
    const Result r = cli({"export", "--out", dir.string(), "--maps", "0,9"});
    CHECK(r.code == 1);
    CHECK(r.err.find("9") != std::string::npos);
  }
  SUBCASE("object placed at its initially detected pose") {
    // Oracle: ground-truth world positions of the object's features at the
    // frame of its first keyframe, moved into static-map coordinates.
    const LoadedRun run = load_run(dir);
    const Scenario sc = load_scenario(scenario_path("desk_box"));
    const World world = build_world(sc);
    const WorldMap& obj = run.maps.at(1);
    const int f = obj.keyframes.at(0).frame_index;
    const FrameTruth* ft = run.truth.frame(f);
    REQUIRE(ft);
    Pose T_static_f;
    for (const auto& e : run.trajectories.at(0))
      if (e.frame_index == f) T_static_f = e.pose;
    const Pose G = T_static_f * ft->camera.inverse();  // world -> static map

    const auto cloud = combined_cloud(run, {0, 1}, 0);
    std::vector<CloudPoint> object_points;
    for (const auto& p : cloud)
      if (p.map_origin == 1) object_points.push_back(p);
    size_t i = 0, checked = 0;
    for (const auto& l : obj.landmarks) {
      if (l.kind != FeatureKind::Point3D) continue;
      const auto& ob = l.observations.at(0);
      const FrameTruth* lt = run.truth.frame(obj.keyframes.at(ob.keyframe).frame_index);
      const MeasurementTruth* mt = lt->find(ob.measurement_id);
      REQUIRE(mt);
      const WorldFeature& wf = world.features.at(mt->feature_id);
      const Vec3 expected = G * (ft->entity_poses.at(wf.entity) * wf.local);
      CHECK((object_points.at(i).position - expected).norm() < 1e-6);
      ++i;
      ++checked;
    }
    CHECK(checked == object_points.size());
    CHECK(checked > 50);
  }
}
