#include "jslam/io/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "jslam/common/error.hpp"

namespace jslam {

using json = nlohmann::ordered_json;

namespace {

std::string printf_string(const char* fmt, auto... args) {
  const int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string s(static_cast<size_t>(n) + 1, '\0');
  std::snprintf(s.data(), s.size(), fmt, args...);
  s.resize(static_cast<size_t>(n));
  return s;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

json parse_document(const std::string& text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string(what) + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version")) throw ParseError(0, std::string(what) + ": missing schema_version");
  if (j.at("schema_version") != kArtifactSchemaVersion)
    throw ParseError(0, std::string(what) + ": unsupported schema_version " + j.at("schema_version").dump());
  return j;
}

// Wraps json type and key errors of a reader into ParseError.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(0, std::string(what) + ": " + e.what());
  }
}

json pose_json(const Pose& p) {
  const auto& q = p.rotation();
  const auto& t = p.translation();
  return json::array({t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()});
}

Pose pose_from(const json& j) {
  if (!j.is_array() || j.size() != 7) throw ParseError(0, "pose must have 7 numbers");
  const Eigen::Quaterniond q(j[6].get<double>(), j[3].get<double>(), j[4].get<double>(), j[5].get<double>());
  return Pose::from_stored(q, Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()));
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec_from(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

template <typename E, size_t N>
E enum_from(const std::string& s, const std::pair<E, const char*> (&table)[N], const char* what) {
  for (const auto& [e, name] : table)
    if (s == name) return e;
  throw ParseError(0, std::string("unknown ") + what + " '" + s + "'");
}

constexpr std::pair<FeatureKind, const char*> kKinds[] = {
    {FeatureKind::Point3D, "point3d"}, {FeatureKind::Point2D, "point2d"}, {FeatureKind::Plane, "plane"}};
constexpr std::pair<FailureReason, const char*> kReasons[] = {
    {FailureReason::None, "none"},
    {FailureReason::TooFewMatches, "too_few_matches"},
    {FailureReason::LowInlierRatio, "low_inlier_ratio"},
    {FailureReason::NoValidHypothesis, "no_valid_hypothesis"},
    {FailureReason::NoCandidateVerified, "no_candidate_verified"},
    {FailureReason::TooFewInliers, "too_few_inliers"}};
constexpr std::pair<RegistrationSource, const char*> kSources[] = {
    {RegistrationSource::FrameBased, "frame_based"},
    {RegistrationSource::SegmentBased, "segment_based"},
    {RegistrationSource::Initialization, "initialization"}};
constexpr std::pair<MapKind, const char*> kMapKinds[] = {{MapKind::Static, "static"}, {MapKind::Object, "object"}};

int frame_from_timestamp(double ts, double frame_rate) { return static_cast<int>(std::lround(ts * frame_rate)); }

}  // namespace

// ---- TUM ----

std::string format_tum(const std::vector<TrajectoryEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    const auto& t = e.pose.translation();
    const auto& q = e.pose.rotation();
    out += printf_string("%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", e.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(),
                         q.z(), q.w());
  }
  return out;
}

std::vector<TrajectoryEntry> parse_tum(const std::string& text, double frame_rate) {
  std::vector<TrajectoryEntry> out;
  const auto lines = lines_of(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    double v[8];
    char extra;
    if (std::sscanf(lines[i].c_str(), "%lf %lf %lf %lf %lf %lf %lf %lf %c", &v[0], &v[1], &v[2], &v[3], &v[4], &v[5],
                    &v[6], &v[7], &extra) != 8)
      throw ParseError(static_cast<int>(i + 1), "expected 8 numbers");
    TrajectoryEntry e;
    e.timestamp = v[0];
    e.frame_index = frame_from_timestamp(v[0], frame_rate);
    e.pose = Pose::from_stored(Eigen::Quaterniond(v[7], v[4], v[5], v[6]), Vec3(v[1], v[2], v[3]));
    out.push_back(e);
  }
  return out;
}

// ---- PLY ----

std::string format_ply(const std::vector<CloudPoint>& points) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(points.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\nproperty int map_origin\nend_header\n";
  for (const auto& p : points)
    out += printf_string("%.9g %.9g %.9g %d\n", p.position.x(), p.position.y(), p.position.z(), p.map_origin);
  return out;
}

std::vector<CloudPoint> parse_ply(const std::string& text) {
  const auto lines = lines_of(text);
  const std::vector<std::string> header{"ply", "format ascii 1.0", "", "property float x", "property float y",
                                        "property float z", "property int map_origin", "end_header"};
  if (lines.size() < header.size()) throw ParseError(static_cast<int>(lines.size()), "truncated PLY header");
  for (size_t i = 0; i < header.size(); ++i)
    if (i != 2 && lines[i] != header[i]) throw ParseError(static_cast<int>(i + 1), "expected '" + header[i] + "'");
  long n = -1;
  if (std::sscanf(lines[2].c_str(), "element vertex %ld", &n) != 1 || n < 0)
    throw ParseError(3, "expected 'element vertex <count>'");
  if (lines.size() != header.size() + static_cast<size_t>(n))
    throw ParseError(static_cast<int>(lines.size()), "vertex count does not match the header");
  std::vector<CloudPoint> out;
  for (size_t i = header.size(); i < lines.size(); ++i) {
    CloudPoint p;
    double x, y, z;
    char extra;
    if (std::sscanf(lines[i].c_str(), "%lf %lf %lf %d %c", &x, &y, &z, &p.map_origin, &extra) != 4)
      throw ParseError(static_cast<int>(i + 1), "expected 'x y z map_origin'");
    p.position = Vec3(x, y, z);
    out.push_back(p);
  }
  return out;
}

std::vector<CloudPoint> map_cloud(const WorldMap& map, const Pose& T) {
  std::vector<CloudPoint> out;
  for (const auto& l : map.landmarks)
    if (l.kind == FeatureKind::Point3D) out.push_back({T * l.position, map.id});
  return out;
}

// ---- CSV / log ----

std::string format_growth_csv(const std::vector<GrowthEntry>& growth) {
  std::string out = "frame,map_id,keyframes,landmarks\n";
  for (const auto& g : growth)
    out += printf_string("%d,%d,%d,%d\n", g.frame_index, g.map_id, g.keyframes, g.landmarks);
  return out;
}

std::vector<GrowthEntry> parse_growth_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "frame,map_id,keyframes,landmarks") throw ParseError(1, "bad map growth header");
  std::vector<GrowthEntry> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    GrowthEntry g;
    char extra;
    if (std::sscanf(lines[i].c_str(), "%d,%d,%d,%d%c", &g.frame_index, &g.map_id, &g.keyframes, &g.landmarks,
                    &extra) != 4)
      throw ParseError(static_cast<int>(i + 1), "expected four integers");
    out.push_back(g);
  }
  return out;
}

std::string format_errors_log(const std::vector<FrameError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    std::string msg = e.message;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out += "frame " + std::to_string(e.frame_index) + ": " + msg + "\n";
  }
  return out;
}

std::vector<FrameError> parse_errors_log(const std::string& text) {
  std::vector<FrameError> out;
  const auto lines = lines_of(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    FrameError e;
    int consumed = 0;
    if (std::sscanf(lines[i].c_str(), "frame %d: %n", &e.frame_index, &consumed) != 1 || consumed == 0)
      throw ParseError(static_cast<int>(i + 1), "expected 'frame <index>: <message>'");
    e.message = lines[i].substr(static_cast<size_t>(consumed));
    out.push_back(e);
  }
  return out;
}

// ---- maps ----

std::string format_maps_json(const std::vector<WorldMap>& maps) {
  json doc{{"schema_version", kArtifactSchemaVersion}, {"maps", json::array()}};
  for (const auto& m : maps) {
    json jm{{"id", m.id}, {"kind", m.kind == MapKind::Static ? "static" : "object"}, {"version", m.version}};
    json kfs = json::array();
    for (const auto& k : m.keyframes) {
      json ids = json::array(), kinds = json::array();
      for (const auto& meas : k.measurements) {
        ids.push_back(meas.id);
        kinds.push_back(to_string(meas.kind));
      }
      kfs.push_back({{"frame", k.frame_index}, {"timestamp", k.timestamp}, {"pose", pose_json(k.pose)},
                     {"measurement_ids", ids}, {"measurement_kinds", kinds}});
    }
    jm["keyframes"] = kfs;
    json lms = json::array();
    for (const auto& l : m.landmarks) {
      json jl{{"id", l.id}, {"kind", to_string(l.kind)}};
      if (l.kind == FeatureKind::Plane) {
        jl["normal"] = vec_json(l.plane.normal);
        jl["offset"] = l.plane.offset;
      } else {
        jl["position"] = vec_json(l.position);
      }
      json obs = json::array();
      for (const auto& o : l.observations) obs.push_back(json::array({o.keyframe, o.measurement_id}));
      jl["observations"] = obs;
      lms.push_back(jl);
    }
    jm["landmarks"] = lms;
    json segs = json::array();
    for (const auto& s : m.segments) segs.push_back({{"id", s.id}, {"keyframe", s.keyframe}, {"landmark_ids", s.landmark_ids}});
    jm["segments"] = segs;
    doc["maps"].push_back(jm);
  }
  return doc.dump(1) + "\n";
}

std::vector<WorldMap> parse_maps_json(const std::string& text) {
  const json doc = parse_document(text, "maps");
  return guarded("maps", [&] {
    std::vector<WorldMap> out;
    for (const auto& jm : doc.at("maps")) {
      WorldMap m;
      m.id = jm.at("id").get<int>();
      m.kind = enum_from(jm.at("kind").get<std::string>(), kMapKinds, "map kind");
      m.version = jm.at("version").get<std::uint64_t>();
      for (const auto& jk : jm.at("keyframes")) {
        Keyframe k;
        k.frame_index = jk.at("frame").get<int>();
        k.timestamp = jk.at("timestamp").get<double>();
        k.pose = pose_from(jk.at("pose"));
        const auto& ids = jk.at("measurement_ids");
        const auto& kinds = jk.at("measurement_kinds");
        if (ids.size() != kinds.size()) throw ParseError(0, "maps: measurement ids and kinds differ in length");
        for (size_t i = 0; i < ids.size(); ++i) {
          Measurement meas;
          meas.id = ids[i].get<int>();
          meas.kind = enum_from(kinds[i].get<std::string>(), kKinds, "feature kind");
          k.measurements.push_back(meas);
        }
        m.keyframes.push_back(std::move(k));
      }
      for (const auto& jl : jm.at("landmarks")) {
        Landmark l;
        l.id = jl.at("id").get<int>();
        l.kind = enum_from(jl.at("kind").get<std::string>(), kKinds, "feature kind");
        if (l.kind == FeatureKind::Plane) {
          l.plane.normal = vec_from(jl.at("normal"));
          l.plane.offset = jl.at("offset").get<double>();
        } else {
          l.position = vec_from(jl.at("position"));
        }
        for (const auto& o : jl.at("observations")) l.observations.push_back({o.at(0).get<int>(), o.at(1).get<int>()});
        m.landmarks.push_back(std::move(l));
      }
      for (const auto& js : jm.at("segments"))
        m.segments.push_back({js.at("id").get<int>(), js.at("keyframe").get<int>(),
                              js.at("landmark_ids").get<std::vector<int>>()});
      out.push_back(std::move(m));
    }
    return out;
  });
}

// ---- outcomes ----

std::string format_outcomes_json(const std::vector<FrameOutcome>& outcomes) {
  json doc{{"schema_version", kArtifactSchemaVersion}, {"frames", json::array()}};
  for (const auto& o : outcomes) {
    json jo{{"frame", o.frame_index}, {"timestamp", o.timestamp}, {"static_tracking_lost", o.static_tracking_lost}};
    json results = json::array();
    for (const auto& [id, r] : o.results) {
      json jr{{"map_id", id},
              {"status", r.ok() ? "success" : "failure"},
              {"reason", to_string(r.reason)},
              {"source", to_string(r.source)},
              {"match_count", r.match_count}};
      jr["pose"] = r.pose ? pose_json(*r.pose) : json(nullptr);
      jr["inlier_ids"] = r.inlier_ids;
      jr["matched_segment_ids"] = r.matched_segment_ids;
      jr["matched_ids"] = r.matched_ids;
      results.push_back(jr);
    }
    jo["results"] = results;
    json partition = json::array();
    for (const auto& [id, cell] : o.partition) partition.push_back({{"map_id", id}, {"measurement_ids", cell}});
    jo["partition"] = partition;
    jo["new_object_map_ids"] = o.new_object_map_ids;
    json kfs = json::array();
    for (const auto& k : o.keyframes_added) kfs.push_back(json::array({k.map_id, k.keyframe_index}));
    jo["keyframes_added"] = kfs;
    jo["errors"] = o.errors;
    doc["frames"].push_back(jo);
  }
  return doc.dump(1) + "\n";
}

std::vector<FrameOutcome> parse_outcomes_json(const std::string& text) {
  const json doc = parse_document(text, "outcomes");
  return guarded("outcomes", [&] {
    std::vector<FrameOutcome> out;
    for (const auto& jo : doc.at("frames")) {
      FrameOutcome o;
      o.frame_index = jo.at("frame").get<int>();
      o.timestamp = jo.at("timestamp").get<double>();
      o.static_tracking_lost = jo.at("static_tracking_lost").get<bool>();
      for (const auto& jr : jo.at("results")) {
        RegistrationResult r;
        const std::string status = jr.at("status").get<std::string>();
        if (status != "success" && status != "failure") throw ParseError(0, "outcomes: unknown status '" + status + "'");
        r.status = status == "success" ? RegistrationStatus::Success : RegistrationStatus::Failure;
        r.reason = enum_from(jr.at("reason").get<std::string>(), kReasons, "failure reason");
        r.source = enum_from(jr.at("source").get<std::string>(), kSources, "registration source");
        r.match_count = jr.at("match_count").get<int>();
        if (!jr.at("pose").is_null()) r.pose = pose_from(jr.at("pose"));
        r.inlier_ids = jr.at("inlier_ids").get<std::vector<int>>();
        r.matched_segment_ids = jr.at("matched_segment_ids").get<std::vector<int>>();
        r.matched_ids = jr.at("matched_ids").get<std::vector<int>>();
        o.results[jr.at("map_id").get<int>()] = std::move(r);
      }
      for (const auto& jp : jo.at("partition"))
        o.partition[jp.at("map_id").get<int>()] = jp.at("measurement_ids").get<std::vector<int>>();
      o.new_object_map_ids = jo.at("new_object_map_ids").get<std::vector<int>>();
      for (const auto& k : jo.at("keyframes_added")) o.keyframes_added.push_back({k.at(0).get<int>(), k.at(1).get<int>()});
      o.errors = jo.at("errors").get<std::vector<std::string>>();
      out.push_back(std::move(o));
    }
    return out;
  });
}

// ---- ground truth ----

std::string format_ground_truth_json(const GroundTruth& truth) {
  json doc{{"schema_version", kArtifactSchemaVersion}, {"object_label", truth.object_label}, {"frames", json::array()}};
  for (const auto& f : truth.frames) {
    json jf{{"frame", f.frame_index}, {"camera", pose_json(f.camera)}};
    json poses = json::array();
    for (const auto& p : f.entity_poses) poses.push_back(pose_json(p));
    jf["entity_poses"] = poses;
    // rows of [measurement id, entity, origin, world feature id]
    json rows = json::array();
    for (const auto& m : f.measurements) rows.push_back(json::array({m.measurement_id, m.entity, m.origin, m.feature_id}));
    jf["measurements"] = rows;
    json seg = json::array();
    for (const auto& [id, origin] : f.segment_origin) seg.push_back(json::array({id, origin}));
    jf["segment_origin"] = seg;
    doc["frames"].push_back(jf);
  }
  return doc.dump(1) + "\n";
}

GroundTruth parse_ground_truth_json(const std::string& text) {
  const json doc = parse_document(text, "ground_truth");
  return guarded("ground_truth", [&] {
    GroundTruth t;
    t.object_label = doc.at("object_label").get<std::vector<int>>();
    for (const auto& jf : doc.at("frames")) {
      FrameTruth f;
      f.frame_index = jf.at("frame").get<int>();
      f.camera = pose_from(jf.at("camera"));
      for (const auto& p : jf.at("entity_poses")) f.entity_poses.push_back(pose_from(p));
      for (const auto& r : jf.at("measurements"))
        f.measurements.push_back({r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()});
      for (const auto& s : jf.at("segment_origin")) f.segment_origin[s.at(0).get<int>()] = s.at(1).get<int>();
      t.frames.push_back(std::move(f));
    }
    return t;
  });
}

// ---- metrics ----

std::string format_metrics_json(const RunMetrics& metrics) {
  json doc{{"schema_version", kArtifactSchemaVersion}, {"frames", metrics.frames}, {"frame_errors", metrics.frame_errors}};
  json maps = json::array();
  for (const auto& m : metrics.maps) {
    json jm{{"map_id", m.map_id}, {"origin", m.origin}, {"keyframes", m.keyframes}, {"landmarks", m.landmarks}};
    if (m.trajectory) {
      jm["trajectory"] = {{"ate_rmse_m", m.trajectory->ate_rmse},
                          {"rot_rmse_deg", m.trajectory->rot_rmse},
                          {"translation_errors_m", m.trajectory->translation_errors},
                          {"rotation_errors_deg", m.trajectory->rotation_errors},
                          {"alignment", pose_json(m.trajectory->alignment)}};
    } else {
      jm["trajectory"] = nullptr;
    }
    const auto& c = m.classification;
    jm["classification"] = {{"frames_evaluated", c.frames_evaluated},
                            {"tp", c.counts.tp},
                            {"fp", c.counts.fp},
                            {"fn", c.counts.fn},
                            {"tn", c.counts.tn},
                            {"precision", c.counts.precision()},
                            {"recall", c.counts.recall()},
                            {"f1", c.counts.f1()}};
    jm["purity"] = m.purity ? json(*m.purity) : json(nullptr);
    jm["frames_visible"] = m.frames_visible;
    jm["frames_registered"] = m.frames_registered;
    jm["registration_rate"] = m.registration_rate();
    maps.push_back(jm);
  }
  doc["maps"] = maps;
  return doc.dump(1) + "\n";
}

RunMetrics parse_metrics_json(const std::string& text) {
  const json doc = parse_document(text, "metrics");
  return guarded("metrics", [&] {
    RunMetrics out;
    out.frames = doc.at("frames").get<int>();
    out.frame_errors = doc.at("frame_errors").get<int>();
    for (const auto& jm : doc.at("maps")) {
      MapMetrics m;
      m.map_id = jm.at("map_id").get<int>();
      m.origin = jm.at("origin").get<int>();
      m.keyframes = jm.at("keyframes").get<int>();
      m.landmarks = jm.at("landmarks").get<int>();
      if (const auto& jt = jm.at("trajectory"); !jt.is_null()) {
        TrajectoryError t;
        t.ate_rmse = jt.at("ate_rmse_m").get<double>();
        t.rot_rmse = jt.at("rot_rmse_deg").get<double>();
        t.translation_errors = jt.at("translation_errors_m").get<std::vector<double>>();
        t.rotation_errors = jt.at("rotation_errors_deg").get<std::vector<double>>();
        t.alignment = pose_from(jt.at("alignment"));
        m.trajectory = t;
      }
      const auto& jc = jm.at("classification");
      m.classification.map_id = m.map_id;
      m.classification.origin = m.origin;
      m.classification.frames_evaluated = jc.at("frames_evaluated").get<int>();
      m.classification.counts = {jc.at("tp").get<long>(), jc.at("fp").get<long>(), jc.at("fn").get<long>(),
                                 jc.at("tn").get<long>()};
      if (!jm.at("purity").is_null()) m.purity = jm.at("purity").get<double>();
      m.frames_visible = jm.at("frames_visible").get<int>();
      m.frames_registered = jm.at("frames_registered").get<int>();
      out.maps.push_back(std::move(m));
    }
    return out;
  });
}

// ---- config ----

namespace {

json config_json(const SlamConfig& c) {
  const auto& r = c.ransac;
  const auto& th = r.thresholds;
  return {{"ransac",
           {{"min_matches", r.min_matches},
            {"success_inlier_ratio", r.success_inlier_ratio},
            {"max_iterations", r.max_iterations},
            {"confidence", r.confidence},
            {"depth_noise_coeff", th.depth_noise_coeff},
            {"sigma_floor", th.sigma_floor},
            {"reproj_threshold", th.reproj_px},
            {"plane_angle_threshold", th.plane_angle_deg},
            {"rng_seed", r.rng_seed},
            {"match_ratio", r.match_ratio},
            {"segment_min_matches", r.segment_min_matches},
            {"appearance_top_k", r.appearance_top_k},
            {"prediction_gate", r.prediction_gate}}},
          {"detection",
           {{"outlier_ratio_threshold", c.detection.outlier_ratio_threshold},
            {"min_segment_size", c.detection.min_segment_size},
            {"keyframe_translation", c.detection.keyframe_translation},
            {"keyframe_rotation", c.detection.keyframe_rotation}}},
          {"keyframe_window", c.keyframe_window},
          {"novelty_distance", c.novelty_distance},
          {"segment_coverage", c.segment_coverage},
          {"ba",
           {{"enabled", c.ba.enabled},
            {"async", c.ba.async},
            {"merge_lag", c.ba.merge_lag},
            {"max_iterations", c.ba.options.max_iterations},
            {"min_cost_decrease", c.ba.options.min_cost_decrease}}}};
}

SlamConfig config_from(const json& j) {
  SlamConfig c;
  const auto& r = j.at("ransac");
  c.ransac.min_matches = r.at("min_matches").get<int>();
  c.ransac.success_inlier_ratio = r.at("success_inlier_ratio").get<double>();
  c.ransac.max_iterations = r.at("max_iterations").get<int>();
  c.ransac.confidence = r.at("confidence").get<double>();
  c.ransac.thresholds.depth_noise_coeff = r.at("depth_noise_coeff").get<double>();
  c.ransac.thresholds.sigma_floor = r.at("sigma_floor").get<double>();
  c.ransac.thresholds.reproj_px = r.at("reproj_threshold").get<double>();
  c.ransac.thresholds.plane_angle_deg = r.at("plane_angle_threshold").get<double>();
  c.ransac.rng_seed = r.at("rng_seed").get<std::uint64_t>();
  c.ransac.match_ratio = r.at("match_ratio").get<double>();
  c.ransac.segment_min_matches = r.at("segment_min_matches").get<int>();
  c.ransac.appearance_top_k = r.at("appearance_top_k").get<int>();
  c.ransac.prediction_gate = r.at("prediction_gate").get<double>();
  const auto& d = j.at("detection");
  c.detection.outlier_ratio_threshold = d.at("outlier_ratio_threshold").get<double>();
  c.detection.min_segment_size = d.at("min_segment_size").get<int>();
  c.detection.keyframe_translation = d.at("keyframe_translation").get<double>();
  c.detection.keyframe_rotation = d.at("keyframe_rotation").get<double>();
  c.keyframe_window = j.at("keyframe_window").get<int>();
  c.novelty_distance = j.at("novelty_distance").get<double>();
  c.segment_coverage = j.at("segment_coverage").get<double>();
  const auto& b = j.at("ba");
  c.ba.enabled = b.at("enabled").get<bool>();
  c.ba.async = b.at("async").get<bool>();
  c.ba.merge_lag = b.at("merge_lag").get<int>();
  c.ba.options.max_iterations = b.at("max_iterations").get<int>();
  c.ba.options.min_cost_decrease = b.at("min_cost_decrease").get<double>();
  return c;
}

}  // namespace

std::string format_config_json(const SlamConfig& cfg) {
  json doc{{"schema_version", kArtifactSchemaVersion}, {"config", config_json(cfg)}};
  return doc.dump(1) + "\n";
}

SlamConfig parse_config_json(const std::string& text) {
  const json doc = parse_document(text, "config");
  return guarded("config", [&] { return config_from(doc.at("config")); });
}

// ---- manifest ----

std::string format_manifest_json(const RunManifest& m) {
  json doc{{"schema_version", m.schema_version},
           {"scenario_schema_version", m.scenario_schema_version},
           {"scenario", {{"name", m.scenario_name}, {"path", m.scenario_path}}},
           {"seed", m.seed},
           {"frame_count", m.frame_count},
           {"frame_rate", m.frame_rate},
           {"config", config_json(m.config)},
           {"map_ids", m.map_ids},
           {"files", m.files}};
  return doc.dump(1) + "\n";
}

RunManifest parse_manifest_json(const std::string& text) {
  const json doc = parse_document(text, "manifest");
  return guarded("manifest", [&] {
    RunManifest m;
    m.scenario_schema_version = doc.at("scenario_schema_version").get<int>();
    m.scenario_name = doc.at("scenario").at("name").get<std::string>();
    m.scenario_path = doc.at("scenario").at("path").get<std::string>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.frame_count = doc.at("frame_count").get<int>();
    m.frame_rate = doc.at("frame_rate").get<double>();
    m.config = config_from(doc.at("config"));
    m.map_ids = doc.at("map_ids").get<std::vector<int>>();
    m.files = doc.at("files").get<std::vector<std::string>>();
    return m;
  });
}

// ---- files ----

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace run_files {
std::string frames_trajectory(int map_id) { return "map_" + std::to_string(map_id) + "_frames.tum"; }
std::string keyframes_trajectory(int map_id) { return "map_" + std::to_string(map_id) + "_keyframes.tum"; }
std::string cloud(int map_id) { return "map_" + std::to_string(map_id) + ".ply"; }
}  // namespace run_files

RunManifest write_run(const RunArtifacts& run, const std::filesystem::path& dir, const std::string& scenario_path) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  RunManifest m;
  m.scenario_schema_version = run.scenario.schema_version;
  m.scenario_name = run.scenario.name;
  m.scenario_path = scenario_path;
  m.seed = run.scenario.seed;
  m.frame_count = run.scenario.frame_count;
  m.frame_rate = run.scenario.frame_rate;
  m.config = run.config;

  std::vector<WorldMap> maps;
  for (const auto& snap : run.maps) maps.push_back(*snap);
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    m.files.push_back(name);
  };
  for (const auto& map : maps) {
    m.map_ids.push_back(map.id);
    auto it = run.trajectories.find(map.id);
    emit(run_files::frames_trajectory(map.id), format_tum(it != run.trajectories.end() ? it->second
                                                                                      : std::vector<TrajectoryEntry>{}));
    std::vector<TrajectoryEntry> kfs;
    for (const auto& k : map.keyframes) kfs.push_back({k.frame_index, k.timestamp, k.pose});
    emit(run_files::keyframes_trajectory(map.id), format_tum(kfs));
    emit(run_files::cloud(map.id), format_ply(map_cloud(map)));
  }
  emit(run_files::kMaps, format_maps_json(maps));
  emit(run_files::kOutcomes, format_outcomes_json(run.outcomes));
  emit(run_files::kGroundTruth, format_ground_truth_json(run.truth));
  emit(run_files::kGrowth, format_growth_csv(run.growth));
  emit(run_files::kErrors, format_errors_log(run.errors));
  m.files.push_back(run_files::kManifest);
  std::sort(m.files.begin(), m.files.end());
  write_text(dir / run_files::kManifest, format_manifest_json(m));
  return m;
}

LoadedRun load_run(const std::filesystem::path& dir) {
  auto read = [&](const std::string& name) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) throw Error("missing " + path.string());
    return read_text(path);
  };
  auto named = [](const std::string& name, auto&& f) {
    try {
      return f();
    } catch (const ParseError& e) {
      throw Error(name + ": " + e.what());
    }
  };
  LoadedRun r;
  r.manifest = named(run_files::kManifest, [&] { return parse_manifest_json(read(run_files::kManifest)); });
  r.maps = named(run_files::kMaps, [&] { return parse_maps_json(read(run_files::kMaps)); });
  r.outcomes = named(run_files::kOutcomes, [&] { return parse_outcomes_json(read(run_files::kOutcomes)); });
  r.truth = named(run_files::kGroundTruth, [&] { return parse_ground_truth_json(read(run_files::kGroundTruth)); });
  r.errors = named(run_files::kErrors, [&] { return parse_errors_log(read(run_files::kErrors)); });
  for (int id : r.manifest.map_ids) {
    const std::string name = run_files::frames_trajectory(id);
    r.trajectories[id] = named(name, [&] { return parse_tum(read(name), r.manifest.frame_rate); });
  }
  return r;
}

}  // namespace jslam
