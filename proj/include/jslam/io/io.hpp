#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jslam/eval/evaluation.hpp"
#include "jslam/sim/run.hpp"

namespace jslam {

inline constexpr int kArtifactSchemaVersion = 1;

// TUM RGB-D trajectory: `timestamp tx ty tz qx qy qz qw`, 9 significant digits.
std::string format_tum(const std::vector<TrajectoryEntry>& entries);
/// Frame indices are recovered as round(timestamp * frame_rate). Throws ParseError.
std::vector<TrajectoryEntry> parse_tum(const std::string& text, double frame_rate);

struct CloudPoint {
  Vec3 position = Vec3::Zero();
  int map_origin = 0;  // id of the map the point came from

  bool operator==(const CloudPoint&) const = default;
};

/// ASCII PLY with float x y z and an int map_origin property.
std::string format_ply(const std::vector<CloudPoint>& points);
/// Reads the files written by format_ply. Throws ParseError.
std::vector<CloudPoint> parse_ply(const std::string& text);

/// Point landmarks of a map in its own coordinates, optionally moved by `T`.
std::vector<CloudPoint> map_cloud(const WorldMap& map, const Pose& T = Pose::identity());

std::string format_growth_csv(const std::vector<GrowthEntry>& growth);
std::vector<GrowthEntry> parse_growth_csv(const std::string& text);

std::string format_errors_log(const std::vector<FrameError>& errors);
std::vector<FrameError> parse_errors_log(const std::string& text);

// JSON documents. Each carries schema_version; readers reject other versions
// with ParseError. Measurements and descriptors are not stored, so maps read
// back hold keyframe poses, measurement ids, landmarks and observations.
std::string format_maps_json(const std::vector<WorldMap>& maps);
std::vector<WorldMap> parse_maps_json(const std::string& text);

std::string format_outcomes_json(const std::vector<FrameOutcome>& outcomes);
std::vector<FrameOutcome> parse_outcomes_json(const std::string& text);

std::string format_ground_truth_json(const GroundTruth& truth);
GroundTruth parse_ground_truth_json(const std::string& text);

std::string format_metrics_json(const RunMetrics& metrics);
RunMetrics parse_metrics_json(const std::string& text);

std::string format_config_json(const SlamConfig& cfg);
SlamConfig parse_config_json(const std::string& text);

/// Writes `text` exactly; throws Error when the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);
/// Throws Error when the file cannot be read.
std::string read_text(const std::filesystem::path& path);

// Run directory layout.
namespace run_files {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kMaps = "maps.json";
inline constexpr const char* kOutcomes = "outcomes.json";
inline constexpr const char* kGroundTruth = "ground_truth.json";
inline constexpr const char* kGrowth = "map_growth.csv";
inline constexpr const char* kErrors = "errors.log";
inline constexpr const char* kMetrics = "metrics.json";
std::string frames_trajectory(int map_id);     // map_<id>_frames.tum, every registered frame
std::string keyframes_trajectory(int map_id);  // map_<id>_keyframes.tum
std::string cloud(int map_id);                 // map_<id>.ply
}  // namespace run_files

struct RunManifest {
  int schema_version = kArtifactSchemaVersion;
  int scenario_schema_version = 0;
  std::string scenario_name;
  std::string scenario_path;
  std::uint64_t seed = 0;
  int frame_count = 0;
  double frame_rate = 0.0;
  SlamConfig config;
  std::vector<int> map_ids;
  std::vector<std::string> files;  // relative to the run directory, sorted
};

std::string format_manifest_json(const RunManifest& m);
RunManifest parse_manifest_json(const std::string& text);

/// Writes every artifact of a run. Nothing time-dependent is written, so
/// identical runs give identical directories.
RunManifest write_run(const RunArtifacts& run, const std::filesystem::path& dir, const std::string& scenario_path);

struct LoadedRun {
  RunManifest manifest;
  std::vector<WorldMap> maps;
  std::map<int, std::vector<TrajectoryEntry>> trajectories;  // from the per-frame TUM files
  std::vector<FrameOutcome> outcomes;
  GroundTruth truth;
  std::vector<FrameError> errors;
};

/// Reads a run directory back. Throws Error naming the first missing or
/// malformed file.
LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace jslam
