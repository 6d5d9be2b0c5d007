#include "jslam/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <set>
#include <sstream>

#include "jslam/common/error.hpp"

namespace jslam {

using nlohmann::json;

Pose Trajectory::at(int frame) const {
  if (waypoints.empty()) return Pose::identity();
  if (frame <= waypoints.front().frame) return Pose(waypoints.front().rotation, waypoints.front().position);
  for (size_t i = 1; i < waypoints.size(); ++i) {
    const Waypoint& a = waypoints[i - 1];
    const Waypoint& b = waypoints[i];
    if (frame > b.frame) continue;
    const double s = double(frame - a.frame) / double(b.frame - a.frame);
    return Pose(a.rotation.slerp(s, b.rotation), (1.0 - s) * a.position + s * b.position);
  }
  return Pose(waypoints.back().rotation, waypoints.back().position);
}

int Trajectory::first_motion_frame(int frame_count) const {
  const Pose p0 = at(0);
  for (int t = 1; t < frame_count; ++t) {
    const PoseDelta d = pose_difference(at(t), p0);
    if (d.translation > 1e-12 || d.angle_rad > 1e-12) return t;
  }
  return frame_count;
}

Eigen::Quaterniond look_at_rotation(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitY());  // looking straight up or down
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = z;
  return Eigen::Quaterniond(R).normalized();
}

Eigen::Quaterniond rpy_rotation(const Vec3& rpy_deg) {
  const Vec3 r = rpy_deg * M_PI / 180.0;
  return (Eigen::AngleAxisd(r.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(r.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(r.x(), Vec3::UnitX()))
      .normalized();
}

int Scenario::object_count() const {
  return static_cast<int>(
      std::count_if(entities.begin(), entities.end(), [](const EntitySpec& e) { return e.type == EntityType::Object; }));
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void validate_trajectory(const Trajectory& tr, const std::string& owner) {
  require(!tr.waypoints.empty(), owner + ": trajectory has no waypoints");
  require(tr.waypoints.front().frame == 0, owner + ": trajectory must start at frame 0");
  for (size_t i = 1; i < tr.waypoints.size(); ++i)
    require(tr.waypoints[i].frame > tr.waypoints[i - 1].frame, owner + ": waypoint frames must increase");
  for (const auto& w : tr.waypoints) require(w.position.allFinite(), owner + ": non-finite waypoint");
}

}  // namespace

void Scenario::validate() const {
  require(schema_version == kScenarioSchemaVersion,
          "unsupported schema_version " + std::to_string(schema_version));
  require(frame_count >= 1, "frame_count must be at least 1");
  require(frame_rate > 0.0, "frame_rate must be positive");
  require(max_depth > 0.0, "max_depth must be positive");
  require(intrinsics.fx > 0.0 && intrinsics.fy > 0.0, "focal lengths must be positive");
  require(intrinsics.width > 0 && intrinsics.height > 0, "image size must be positive");
  require(noise.depth_coeff >= 0.0, "noise.depth_coeff must be non-negative");
  require(noise.pixel_sigma >= 0.0, "noise.pixel_sigma must be non-negative");
  require(noise.descriptor_sigma >= 0.0, "noise.descriptor_sigma must be non-negative");
  require(noise.plane_angle_sigma_deg >= 0.0, "noise.plane_angle_sigma_deg must be non-negative");
  require(noise.mismatch_rate >= 0.0 && noise.mismatch_rate <= 1.0, "noise.mismatch_rate must lie in [0, 1]");
  require(segmentation.merge_prob >= 0.0 && segmentation.merge_prob <= 1.0,
          "segmentation.merge_prob must lie in [0, 1]");
  require(segmentation.split_prob >= 0.0 && segmentation.split_prob <= 1.0,
          "segmentation.split_prob must lie in [0, 1]");
  require(segmentation.adjacency_radius > 0.0, "segmentation.adjacency_radius must be positive");
  require(!entities.empty(), "scenario declares no entities");
  validate_trajectory(camera, "camera");
  std::set<std::string> names;
  for (const auto& e : entities) {
    require(!e.name.empty(), "entity without a name");
    require(names.insert(e.name).second, "duplicate entity name '" + e.name + "'");
    if (e.type == EntityType::Object)
      validate_trajectory(e.trajectory, "object '" + e.name + "'");
    else
      require(e.trajectory.waypoints.empty(), "static entity '" + e.name + "' cannot have a trajectory");
    for (const auto& p : e.patches) {
      require(p.points >= 0 && p.half_u > 0.0 && p.half_v > 0.0, e.name + ": invalid patch extents");
      require(p.axis_u.norm() > 1e-9 && p.axis_v.norm() > 1e-9 && p.axis_u.cross(p.axis_v).norm() > 1e-6,
              e.name + ": patch axes must be independent");
    }
    for (const auto& c : e.clusters) require(c.points >= 0 && c.radius >= 0.0, e.name + ": invalid cluster");
  }
}

namespace {

// JSON reader that knows the source text, so errors can name a line.
class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  int line_of_key(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"");
    return pos == std::string::npos ? 0 : line_at(pos);
  }
  int line_at(size_t byte) const {
    byte = std::min(byte, text_.size());
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<long>(byte), '\n'));
  }

  void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) const {
    if (!obj.is_object()) throw ParseError(0, where + ": expected an object");
    for (const auto& [k, v] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
        throw ParseError(line_of_key(k), where + ": unknown key '" + k + "'");
    }
  }

  const json& at(const json& obj, const char* key, const std::string& where) const {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(0, where + ": missing required key '" + key + "'");
    return *it;
  }

  double number(const json& obj, const char* key, const std::string& where) const {
    const json& v = at(obj, key, where);
    if (!v.is_number()) throw ParseError(line_of_key(key), where + ": '" + key + "' must be a number");
    return v.get<double>();
  }
  double number_or(const json& obj, const char* key, double fallback, const std::string& where) const {
    return obj.contains(key) ? number(obj, key, where) : fallback;
  }
  int integer(const json& obj, const char* key, const std::string& where) const {
    const json& v = at(obj, key, where);
    if (!v.is_number_integer()) throw ParseError(line_of_key(key), where + ": '" + key + "' must be an integer");
    return v.get<int>();
  }
  std::string string(const json& obj, const char* key, const std::string& where) const {
    const json& v = at(obj, key, where);
    if (!v.is_string()) throw ParseError(line_of_key(key), where + ": '" + key + "' must be a string");
    return v.get<std::string>();
  }
  Vec3 vec3(const json& obj, const char* key, const std::string& where) const {
    const json& v = at(obj, key, where);
    if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); }))
      throw ParseError(line_of_key(key), where + ": '" + key + "' must be an array of 3 numbers");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }
  const json& array(const json& obj, const char* key, const std::string& where) const {
    const json& v = at(obj, key, where);
    if (!v.is_array()) throw ParseError(line_of_key(key), where + ": '" + key + "' must be an array");
    return v;
  }

 private:
  const std::string& text_;
};

Trajectory read_trajectory(const Reader& r, const json& arr, const std::string& where, bool camera) {
  Trajectory tr;
  for (size_t i = 0; i < arr.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const json& o = arr[i];
    r.only_keys(o, {"frame", "position", "rpy_deg", "look_at"}, w);
    Waypoint wp;
    wp.frame = r.integer(o, "frame", w);
    wp.position = r.vec3(o, "position", w);
    if (o.contains("rpy_deg") && o.contains("look_at"))
      throw ParseError(r.line_of_key("look_at"), w + ": give either rpy_deg or look_at");
    if (o.contains("rpy_deg")) {
      wp.rotation = rpy_rotation(r.vec3(o, "rpy_deg", w));
    } else if (o.contains("look_at")) {
      if (!camera) throw ParseError(r.line_of_key("look_at"), w + ": look_at is only valid for the camera");
      wp.rotation = look_at_rotation(wp.position, r.vec3(o, "look_at", w));
    }
    tr.waypoints.push_back(wp);
  }
  return tr;
}

Scenario read(const Reader& r, const json& root) {
  Scenario s;
  r.only_keys(root,
              {"schema_version", "name", "seed", "frame_count", "frame_rate", "max_depth", "intrinsics", "noise",
               "segmentation", "entities", "camera"},
              "scenario");
  s.schema_version = r.integer(root, "schema_version", "scenario");
  if (s.schema_version != kScenarioSchemaVersion)
    throw ParseError(r.line_of_key("schema_version"),
                     "unsupported schema_version " + std::to_string(s.schema_version));
  s.name = root.contains("name") ? r.string(root, "name", "scenario") : std::string("unnamed");
  {
    const json& seed = r.at(root, "seed", "scenario");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
      throw ParseError(r.line_of_key("seed"), "scenario: 'seed' must be a non-negative integer");
    s.seed = seed.get<std::uint64_t>();
  }
  s.frame_count = r.integer(root, "frame_count", "scenario");
  s.frame_rate = r.number_or(root, "frame_rate", s.frame_rate, "scenario");
  s.max_depth = r.number_or(root, "max_depth", s.max_depth, "scenario");

  if (root.contains("intrinsics")) {
    const json& k = root["intrinsics"];
    r.only_keys(k, {"fx", "fy", "cx", "cy", "width", "height"}, "intrinsics");
    s.intrinsics.fx = r.number_or(k, "fx", s.intrinsics.fx, "intrinsics");
    s.intrinsics.fy = r.number_or(k, "fy", s.intrinsics.fy, "intrinsics");
    s.intrinsics.cx = r.number_or(k, "cx", s.intrinsics.cx, "intrinsics");
    s.intrinsics.cy = r.number_or(k, "cy", s.intrinsics.cy, "intrinsics");
    if (k.contains("width")) s.intrinsics.width = r.integer(k, "width", "intrinsics");
    if (k.contains("height")) s.intrinsics.height = r.integer(k, "height", "intrinsics");
  }
  if (root.contains("noise")) {
    const json& n = root["noise"];
    r.only_keys(n, {"depth_coeff", "pixel_sigma", "descriptor_sigma", "mismatch_rate", "plane_angle_sigma_deg"},
                "noise");
    s.noise.depth_coeff = r.number_or(n, "depth_coeff", s.noise.depth_coeff, "noise");
    s.noise.pixel_sigma = r.number_or(n, "pixel_sigma", s.noise.pixel_sigma, "noise");
    s.noise.descriptor_sigma = r.number_or(n, "descriptor_sigma", s.noise.descriptor_sigma, "noise");
    s.noise.mismatch_rate = r.number_or(n, "mismatch_rate", s.noise.mismatch_rate, "noise");
    s.noise.plane_angle_sigma_deg = r.number_or(n, "plane_angle_sigma_deg", s.noise.plane_angle_sigma_deg, "noise");
  }
  if (root.contains("segmentation")) {
    const json& g = root["segmentation"];
    r.only_keys(g, {"merge_prob", "split_prob", "adjacency_radius"}, "segmentation");
    s.segmentation.merge_prob = r.number_or(g, "merge_prob", 0.0, "segmentation");
    s.segmentation.split_prob = r.number_or(g, "split_prob", 0.0, "segmentation");
    s.segmentation.adjacency_radius = r.number_or(g, "adjacency_radius", s.segmentation.adjacency_radius, "segmentation");
  }

  const json& cam = r.at(root, "camera", "scenario");
  r.only_keys(cam, {"trajectory"}, "camera");
  s.camera = read_trajectory(r, r.array(cam, "trajectory", "camera"), "camera.trajectory", true);

  const json& ents = r.array(root, "entities", "scenario");
  for (size_t i = 0; i < ents.size(); ++i) {
    const std::string w = "entities[" + std::to_string(i) + "]";
    const json& e = ents[i];
    r.only_keys(e, {"name", "type", "patches", "clusters", "trajectory"}, w);
    EntitySpec spec;
    spec.name = r.string(e, "name", w);
    const std::string type = r.string(e, "type", w);
    if (type == "static")
      spec.type = EntityType::Static;
    else if (type == "object")
      spec.type = EntityType::Object;
    else
      throw ParseError(r.line_of_key("type"), w + ": type must be 'static' or 'object'");
    if (e.contains("patches")) {
      const json& ps = r.array(e, "patches", w);
      for (size_t j = 0; j < ps.size(); ++j) {
        const std::string pw = w + ".patches[" + std::to_string(j) + "]";
        r.only_keys(ps[j], {"center", "axis_u", "axis_v", "half_extents", "points"}, pw);
        PatchSpec p;
        p.center = r.vec3(ps[j], "center", pw);
        p.axis_u = r.vec3(ps[j], "axis_u", pw);
        p.axis_v = r.vec3(ps[j], "axis_v", pw);
        const json& he = r.array(ps[j], "half_extents", pw);
        if (he.size() != 2 || !he[0].is_number() || !he[1].is_number())
          throw ParseError(r.line_of_key("half_extents"), pw + ": half_extents must be 2 numbers");
        p.half_u = he[0].get<double>();
        p.half_v = he[1].get<double>();
        p.points = r.integer(ps[j], "points", pw);
        spec.patches.push_back(p);
      }
    }
    if (e.contains("clusters")) {
      const json& cs = r.array(e, "clusters", w);
      for (size_t j = 0; j < cs.size(); ++j) {
        const std::string cw = w + ".clusters[" + std::to_string(j) + "]";
        r.only_keys(cs[j], {"center", "radius", "points"}, cw);
        ClusterSpec c;
        c.center = r.vec3(cs[j], "center", cw);
        c.radius = r.number(cs[j], "radius", cw);
        c.points = r.integer(cs[j], "points", cw);
        spec.clusters.push_back(c);
      }
    }
    if (e.contains("trajectory"))
      spec.trajectory = read_trajectory(r, r.array(e, "trajectory", w), w + ".trajectory", false);
    s.entities.push_back(std::move(spec));
  }
  // normalize patch axes; v is re-orthogonalized against u
  for (auto& e : s.entities)
    for (auto& p : e.patches) {
      if (p.axis_u.norm() > 1e-9) p.axis_u.normalize();
      const Vec3 v = p.axis_v - p.axis_v.dot(p.axis_u) * p.axis_u;
      if (v.norm() > 1e-9) p.axis_v = v.normalized();
    }
  return s;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  const Reader reader(text);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(reader.line_at(e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
  Scenario s;
  try {
    s = read(reader, root);
  } catch (const json::exception& e) {
    throw ParseError(0, e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace jslam
