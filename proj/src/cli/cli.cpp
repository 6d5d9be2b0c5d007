#include "jslam/cli/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <ostream>

#include "jslam/common/error.hpp"

namespace jslam {

using json = nlohmann::ordered_json;

namespace {

void collect_keys(const json& node, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [k, v] : node.items()) {
    const std::string path = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) collect_keys(v, path, out);
    else out.push_back(path);
  }
}

json config_tree(const SlamConfig& cfg) { return json::parse(format_config_json(cfg)); }

json::json_pointer pointer_of(const std::string& dotted) {
  std::string p;
  size_t start = 0;
  for (size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1)
    p += "/" + dotted.substr(start, dot - start);
  return json::json_pointer(p + "/" + dotted.substr(start));
}

template <typename T>
std::optional<T> parse_integer(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

std::vector<std::string> override_keys() {
  std::vector<std::string> keys;
  collect_keys(config_tree(SlamConfig{}).at("config"), "", keys);
  return keys;
}

void apply_override(SlamConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not key=value");
  std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  const std::vector<std::string> keys = override_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    std::vector<std::string> hits;
    for (const auto& k : keys)
      if (k == key || k.ends_with("." + key)) hits.push_back(k);
    if (hits.empty()) throw ValidationError("unknown parameter '" + key + "'");
    if (hits.size() > 1) throw ValidationError("parameter '" + key + "' is ambiguous; qualify it, e.g. '" + hits[0] + "'");
    key = hits[0];
  }

  json tree = config_tree(cfg);
  json& slot = tree.at("config").at(pointer_of(key));
  const auto bad = [&](const char* type) {
    return ValidationError("parameter '" + key + "' expects " + type + ", got '" + value + "'");
  };
  if (slot.is_boolean()) {
    if (value != "true" && value != "false") throw bad("true or false");
    slot = value == "true";
  } else if (slot.is_number_unsigned()) {
    const auto v = parse_integer<std::uint64_t>(value);
    if (!v) throw bad("a non-negative integer");
    slot = *v;
  } else if (slot.is_number_integer()) {
    const auto v = parse_integer<long long>(value);
    if (!v) throw bad("an integer");
    slot = *v;
  } else {
    const auto v = parse_real(value);
    if (!v) throw bad("a number");
    slot = *v;
  }
  SlamConfig updated = parse_config_json(tree.dump());
  updated.validate();
  cfg = updated;
}

std::vector<CloudPoint> combined_cloud(const LoadedRun& run, const std::vector<int>& map_ids, int keyframe) {
  auto find_map = [&](int id) -> const WorldMap& {
    for (const auto& m : run.maps)
      if (m.id == id) return m;
    throw ValidationError("unknown map id " + std::to_string(id));
  };
  auto pose_at = [&](int map_id, int frame) -> std::optional<Pose> {
    auto it = run.trajectories.find(map_id);
    if (it == run.trajectories.end()) return std::nullopt;
    for (const auto& e : it->second)
      if (e.frame_index == frame) return e.pose;
    return std::nullopt;
  };

  std::vector<CloudPoint> out;
  for (int id : map_ids) {
    const WorldMap& map = find_map(id);
    Pose T;
    if (map.kind == MapKind::Object) {
      if (keyframe < 0 || keyframe >= static_cast<int>(map.keyframes.size()))
        throw ValidationError("map " + std::to_string(id) + " has no keyframe " + std::to_string(keyframe));
      const Keyframe& kf = map.keyframes[keyframe];
      const auto T_static = pose_at(0, kf.frame_index);
      if (!T_static)
        throw Error("static map did not register at frame " + std::to_string(kf.frame_index) + " (keyframe " +
                    std::to_string(keyframe) + " of map " + std::to_string(id) + ")");
      // object coordinates -> camera at that frame -> static map
      T = *T_static * kf.pose.inverse();
    }
    const auto cloud = map_cloud(map, T);
    out.insert(out.end(), cloud.begin(), cloud.end());
  }
  return out;
}

std::string summary_table(const RunMetrics& metrics) {
  std::string s = "map origin  kf   lm  ATE[cm]  rot[deg]  precision  recall  purity  registered\n";
  for (const auto& m : metrics.maps) {
    const auto& c = m.classification.counts;
    s += pad(std::to_string(m.map_id), 3) + pad(std::to_string(m.origin), 7) + pad(std::to_string(m.keyframes), 4) +
         pad(std::to_string(m.landmarks), 5) + pad(m.trajectory ? fixed(100.0 * m.trajectory->ate_rmse, 3) : "-", 9) +
         pad(m.trajectory ? fixed(m.trajectory->rot_rmse, 3) : "-", 10) + pad(fixed(c.precision(), 4), 11) +
         pad(fixed(c.recall(), 4), 8) + pad(m.purity ? fixed(*m.purity, 4) : "-", 8) +
         pad(std::to_string(m.frames_registered) + "/" + std::to_string(m.frames_visible), 12) + "\n";
  }
  s += "frames " + std::to_string(metrics.frames) + ", frame errors " + std::to_string(metrics.frame_errors) + "\n";
  return s;
}

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  SlamConfig cfg;
  try {
    scenario = load_scenario(opt.scenario);
    if (opt.seed) scenario.seed = *opt.seed;
    scenario.validate();
  } catch (const Error& e) {
    err << opt.scenario << ": " << e.what() << "\n";
    return 1;
  }
  try {
    for (const auto& o : opt.overrides) apply_override(cfg, o);
    cfg.validate();
  } catch (const Error& e) {
    err << "--set: " << e.what() << "\n";
    return 1;
  }

  std::error_code ec;
  std::filesystem::create_directories(opt.out, ec);
  if (ec) {
    err << "cannot create output directory " << opt.out << ": " << ec.message() << "\n";
    return 1;
  }

  try {
    const RunArtifacts run = run_sequence(scenario, cfg);
    const RunManifest manifest = write_run(run, opt.out, opt.scenario);
    if (opt.verbosity > 0) {
      for (const auto& o : run.outcomes) {
        out << "frame " << o.frame_index << ":";
        for (const auto& [id, r] : o.results)
          out << " map " << id << " " << (r.ok() ? "ok" : to_string(r.reason)) << " (" << r.inlier_ids.size() << " inliers)";
        for (int id : o.new_object_map_ids) out << " new object map " << id;
        out << "\n";
      }
    }
    out << "ran " << manifest.frame_count << " frames of '" << manifest.scenario_name << "': " << manifest.map_ids.size()
        << " maps, " << run.errors.size() << " frame errors, " << fixed(run.runtime_seconds, 2) << " s\n";
    out << "wrote " << manifest.files.size() << " files to " << opt.out << "\n";
    if (!run.errors.empty()) {
      err << run.errors.size() << " frames failed; see " << (std::filesystem::path(opt.out) / run_files::kErrors).string()
          << "\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return 2;
  }
}

int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
  LoadedRun run;
  try {
    run = load_run(opt.out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 1;
  }
  try {
    const RunMetrics metrics =
        evaluate_run(run.maps, run.trajectories, run.outcomes, run.truth, static_cast<int>(run.errors.size()));
    write_text(std::filesystem::path(opt.out) / run_files::kMetrics, format_metrics_json(metrics));
    out << summary_table(metrics);
    return 0;
  } catch (const std::exception& e) {
    err << "evaluation failed: " << e.what() << "\n";
    return 2;
  }
}

int cmd_export(const ExportOptions& opt, std::ostream& out, std::ostream& err) {
  LoadedRun run;
  try {
    run = load_run(opt.out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 1;
  }
  try {
    const auto cloud = combined_cloud(run, opt.maps, opt.keyframe);
    const std::filesystem::path file =
        opt.file.empty() ? std::filesystem::path(opt.out) / "combined.ply" : std::filesystem::path(opt.file);
    write_text(file, format_ply(cloud));
    out << "wrote " << cloud.size() << " points to " << file.string() << "\n";
    return 0;
  } catch (const ValidationError& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "export failed: " << e.what() << "\n";
    return 2;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-map RGB-D SLAM with moving-object detection on simulated scenes", "jslam"};
  app.require_subcommand(1);

  RunOptions run_opt;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run a scenario and write all artifacts");
  run->add_option("--scenario", run_opt.scenario, "Scenario JSON file")->required();
  run->add_option("--out", run_opt.out, "Output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--set", run_opt.overrides, "Parameter override key=value (repeatable)")->allow_extra_args(false);
  run->add_flag("-v,--verbose", run_opt.verbosity, "Print one line per frame");

  EvaluateOptions eval_opt;
  auto* evaluate = app.add_subcommand("evaluate", "Score a run directory against its ground truth");
  evaluate->add_option("--out", eval_opt.out, "Run directory")->required();

  ExportOptions exp_opt;
  auto* exp = app.add_subcommand("export", "Write a combined point cloud of selected maps");
  exp->add_option("--out", exp_opt.out, "Run directory")->required();
  exp->add_option("--maps", exp_opt.maps, "Map ids, comma separated")->required()->delimiter(',');
  exp->add_option("--keyframe", exp_opt.keyframe, "Object keyframe fixing the object pose (0: first detection)");
  exp->add_option("--file", exp_opt.file, "Output PLY (default <out>/combined.ply)");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (!argv.empty()) argv.pop_back();  // program name
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  if (*run) {
    if (*seed_opt) run_opt.seed = seed;
    return cmd_run(run_opt, out, err);
  }
  if (*evaluate) return cmd_evaluate(eval_opt, out, err);
  return cmd_export(exp_opt, out, err);
}

}  // namespace jslam
