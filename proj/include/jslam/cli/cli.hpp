#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jslam/io/io.hpp"

namespace jslam {

/// Applies one `key=value` override. Keys are dotted config paths such as
/// `ransac.min_matches` or `detection.outlier_ratio_threshold`; a bare field
/// name works when it is unambiguous. Values must match the field's type.
/// Throws ValidationError for unknown keys, ill-typed values, or a config
/// that no longer validates.
void apply_override(SlamConfig& cfg, const std::string& assignment);

/// Every key accepted by apply_override, fully qualified.
std::vector<std::string> override_keys();

struct RunOptions {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  int verbosity = 0;
};

struct EvaluateOptions {
  std::string out;
};

struct ExportOptions {
  std::string out;
  std::vector<int> maps;
  int keyframe = 0;    // object keyframe whose frame fixes the object pose
  std::string file;    // defaults to <out>/combined.ply
};

/// Point landmarks of the listed maps in static-map coordinates. An object
/// map is placed with its pose at the frame of its `keyframe`-th keyframe,
/// so keyframe 0 puts it where it was first detected. Throws ValidationError
/// for unknown map ids and Error when the static map did not register at
/// that frame.
std::vector<CloudPoint> combined_cloud(const LoadedRun& run, const std::vector<int>& map_ids, int keyframe = 0);

std::string summary_table(const RunMetrics& metrics);

// Exit codes: 0 success, 1 bad input, 2 runtime failure.
int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_export(const ExportOptions& opt, std::ostream& out, std::ostream& err);

/// Parses the command line (`run`, `evaluate`, `export`) and dispatches.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jslam
