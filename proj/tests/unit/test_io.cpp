#include <doctest.h>

#include <filesystem>
#include <random>

#include "jslam/common/error.hpp"
#include "jslam/io/io.hpp"

using namespace jslam;
namespace fs = std::filesystem;

namespace {

std::string scenario_path(const std::string& name) { return std::string(JSLAM_SCENARIO_DIR) + "/" + name + ".json"; }

const RunArtifacts& noisy_run() {
  static const RunArtifacts run = run_sequence(load_scenario(scenario_path("desk_box_noisy")), SlamConfig{});
  return run;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("jslam_test_io_" + name);
  fs::remove_all(dir);
  return dir;
}

int parse_error_line(auto&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("TUM trajectories") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<TrajectoryEntry> traj;
  for (int i = 0; i < 50; ++i)
    traj.push_back({i, i / 30.0, Pose(quat_exp(Vec3(n(rng), n(rng), n(rng))), Vec3(n(rng), n(rng), n(rng)))});

  const std::string text = format_tum(traj);
  const auto back = parse_tum(text, 30.0);
  REQUIRE(back.size() == traj.size());
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].frame_index == traj[i].frame_index);
    CHECK(pose_difference(back[i].pose, traj[i].pose).translation < 1e-8);
    CHECK(pose_difference(back[i].pose, traj[i].pose).angle_rad < 1e-8);
  }
  CHECK(format_tum(back) == text);

  SUBCASE("eight fields with 9 significant digits") {
    const std::string first = text.substr(0, text.find('\n'));
    CHECK(std::count(first.begin(), first.end(), ' ') == 7);
    CHECK(format_tum({{0, 0.0, Pose(Eigen::Quaterniond::Identity(), Vec3(1.0 / 3.0, 0, 0))}}) ==
          "0 0.333333333 0 0 0 0 0 1\n");
  }
  SUBCASE("comments and blank lines are skipped") {
    CHECK(parse_tum("# header\n\n" + text, 30.0).size() == traj.size());
  }
  SUBCASE("malformed lines name the line") {
    CHECK(parse_error_line([] { parse_tum("0 0 0 0 0 0 0 1\n1 0 0 0 0 0 1\n", 30.0); }) == 2);
    CHECK(parse_error_line([] { parse_tum("0 0 0 0 0 0 0 1 9\n", 30.0); }) == 1);
    CHECK(parse_error_line([] { parse_tum("0 0 0 0 x 0 0 1\n", 30.0); }) == 1);
  }
}

TEST_CASE("PLY clouds") {
  std::vector<CloudPoint> pts{{Vec3(0.1, -2.5, 3.0), 0}, {Vec3(1e-3, 2.0 / 3.0, -7.25), 2}};
  const std::string text = format_ply(pts);
  CHECK(text.rfind("ply\nformat ascii 1.0\nelement vertex 2\n", 0) == 0);
  CHECK(text.find("property int map_origin\n") != std::string::npos);
  const auto back = parse_ply(text);
  REQUIRE(back.size() == 2);
  CHECK(back[1].map_origin == 2);
  CHECK((back[1].position - pts[1].position).norm() < 1e-8);
  CHECK(format_ply(back) == text);

  CHECK(parse_error_line([&] { parse_ply("ply\nformat binary_little_endian 1.0\n" + text.substr(text.find("element"))); }) == 2);
  CHECK(parse_error_line([&] { parse_ply(text + "1 2 3 0\n"); }) > 0);
  std::string bad = text;
  bad.replace(bad.rfind(" 2\n"), 3, " z\n");
  CHECK(parse_error_line([&] { parse_ply(bad); }) == 10);
}

TEST_CASE("map cloud holds the point landmarks") {
  const WorldMap& map = *noisy_run().map(0);
  const auto cloud = map_cloud(map);
  size_t points = 0;
  for (const auto& l : map.landmarks) points += l.kind == FeatureKind::Point3D;
  CHECK(cloud.size() == points);
  const Pose T(quat_exp(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3));
  const auto moved = map_cloud(map, T);
  for (size_t i = 0; i < cloud.size(); ++i) CHECK((moved[i].position - T * cloud[i].position).norm() < 1e-12);
}

TEST_CASE("growth CSV and error log") {
  const std::vector<GrowthEntry> growth{{0, 0, 1, 120}, {5, 1, 1, 30}, {6, 0, 2, 140}};
  const std::string csv = format_growth_csv(growth);
  const auto g = parse_growth_csv(csv);
  REQUIRE(g.size() == 3);
  CHECK(g[1].map_id == 1);
  CHECK(g[2].landmarks == 140);
  CHECK(format_growth_csv(g) == csv);
  CHECK(parse_error_line([] { parse_growth_csv("frame,map_id,keyframes,landmarks\n1,2,3\n"); }) == 2);

  const std::vector<FrameError> errors{{3, "numerical failure: singular system"}, {9, "a: b"}};
  const std::string log = format_errors_log(errors);
  const auto e = parse_errors_log(log);
  REQUIRE(e.size() == 2);
  CHECK(e[1].frame_index == 9);
  CHECK(e[1].message == "a: b");
  CHECK(format_errors_log(e) == log);
  CHECK(parse_error_line([] { parse_errors_log("frame 1: ok\nbroken\n"); }) == 2);
}

TEST_CASE("JSON documents re-serialize to the same bytes") {
  const RunArtifacts& run = noisy_run();
  std::vector<WorldMap> maps;
  for (const auto& m : run.maps) maps.push_back(*m);

  const std::string maps_text = format_maps_json(maps);
  const auto maps_back = parse_maps_json(maps_text);
  CHECK(format_maps_json(maps_back) == maps_text);
  REQUIRE(maps_back.size() == maps.size());
  for (size_t i = 0; i < maps.size(); ++i) {
    CHECK(maps_back[i].landmarks.size() == maps[i].landmarks.size());
    CHECK(maps_back[i].keyframes.size() == maps[i].keyframes.size());
    for (size_t k = 0; k < maps[i].keyframes.size(); ++k)
      CHECK(maps_back[i].keyframes[k].pose.matrix() == maps[i].keyframes[k].pose.matrix());
  }

  const std::string outcomes_text = format_outcomes_json(run.outcomes);
  const auto outcomes_back = parse_outcomes_json(outcomes_text);
  CHECK(format_outcomes_json(outcomes_back) == outcomes_text);
  REQUIRE(outcomes_back.size() == run.outcomes.size());
  CHECK(outcomes_back[10].partition == run.outcomes[10].partition);

  const std::string truth_text = format_ground_truth_json(run.truth);
  const GroundTruth truth_back = parse_ground_truth_json(truth_text);
  CHECK(format_ground_truth_json(truth_back) == truth_text);
  CHECK(truth_back.object_label == run.truth.object_label);

  const RunMetrics metrics = evaluate_run(maps, run.trajectories, run.outcomes, run.truth);
  const std::string metrics_text = format_metrics_json(metrics);
  CHECK(format_metrics_json(parse_metrics_json(metrics_text)) == metrics_text);

  SlamConfig cfg;
  cfg.ransac.min_matches = 12;
  cfg.detection.outlier_ratio_threshold = 0.33;
  cfg.ba.async = false;
  const std::string cfg_text = format_config_json(cfg);
  const SlamConfig cfg_back = parse_config_json(cfg_text);
  CHECK(cfg_back.ransac.min_matches == 12);
  CHECK(cfg_back.detection.outlier_ratio_threshold == 0.33);
  CHECK_FALSE(cfg_back.ba.async);
  CHECK(format_config_json(cfg_back) == cfg_text);

  SUBCASE("other schema versions are rejected") {
    std::string v2 = cfg_text;
    v2.replace(v2.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
    CHECK_THROWS_AS(parse_config_json(v2), ParseError);
    CHECK_THROWS_AS(parse_metrics_json("{}"), ParseError);
    CHECK_THROWS_AS(parse_maps_json("{\"schema_version\": 1, \"maps\": [{\"id\": \"x\"}]}"), ParseError);
    CHECK_THROWS_AS(parse_outcomes_json("not json"), ParseError);
  }
}

TEST_CASE("run directories") {
  const RunArtifacts& run = noisy_run();
  const fs::path dir = fresh_dir("run");
  const RunManifest manifest = write_run(run, dir, "scenarios/desk_box_noisy.json");
  CHECK(manifest.map_ids == std::vector<int>{0, 1});
  CHECK(std::is_sorted(manifest.files.begin(), manifest.files.end()));
  for (const auto& f : manifest.files) CHECK(fs::exists(dir / f));

  SUBCASE("every file re-serializes from its reader to the same bytes") {
    const double rate = run.scenario.frame_rate;
    for (const auto& f : manifest.files) {
      CAPTURE(f);
      const std::string text = read_text(dir / f);
      std::string again;
      if (f.ends_with(".tum")) again = format_tum(parse_tum(text, rate));
      else if (f.ends_with(".ply")) again = format_ply(parse_ply(text));
      else if (f == run_files::kGrowth) again = format_growth_csv(parse_growth_csv(text));
      else if (f == run_files::kErrors) again = format_errors_log(parse_errors_log(text));
      else if (f == run_files::kMaps) again = format_maps_json(parse_maps_json(text));
      else if (f == run_files::kOutcomes) again = format_outcomes_json(parse_outcomes_json(text));
      else if (f == run_files::kGroundTruth) again = format_ground_truth_json(parse_ground_truth_json(text));
      else if (f == run_files::kManifest) again = format_manifest_json(parse_manifest_json(text));
      else FAIL("unexpected file " << f);
      CHECK(again == text);
    }
  }
  SUBCASE("a loaded run evaluates like the in-memory run") {
    const LoadedRun loaded = load_run(dir);
    CHECK(loaded.manifest.seed == run.scenario.seed);
    std::vector<WorldMap> maps;
    for (const auto& m : run.maps) maps.push_back(*m);
    const RunMetrics a = evaluate_run(maps, run.trajectories, run.outcomes, run.truth);
    const RunMetrics b = evaluate_run(loaded.maps, loaded.trajectories, loaded.outcomes, loaded.truth);
    REQUIRE(a.maps.size() == b.maps.size());
    for (size_t i = 0; i < a.maps.size(); ++i) {
      REQUIRE(b.maps[i].trajectory);
      CHECK(b.maps[i].trajectory->ate_rmse == doctest::Approx(a.maps[i].trajectory->ate_rmse).epsilon(1e-6));
      CHECK(b.maps[i].classification.counts.tp == a.maps[i].classification.counts.tp);
      CHECK(*b.maps[i].purity == *a.maps[i].purity);
    }
  }
  SUBCASE("a missing file is reported") {
    fs::remove(dir / run_files::frames_trajectory(1));
    CHECK_THROWS_AS(load_run(dir), Error);
  }
  SUBCASE("writing twice gives identical bytes") {
    const fs::path dir2 = fresh_dir("run2");
    write_run(run, dir2, "scenarios/desk_box_noisy.json");
    for (const auto& f : manifest.files) CHECK(read_text(dir / f) == read_text(dir2 / f));
    fs::remove_all(dir2);
  }
  fs::remove_all(dir);
}
