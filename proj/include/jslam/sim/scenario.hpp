#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jslam/geometry/pose.hpp"
#include "jslam/geometry/primitives.hpp"

namespace jslam {

inline constexpr int kScenarioSchemaVersion = 1;

struct Waypoint {
  int frame = 0;
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
};

/// Piecewise pose path: linear in position, slerp in rotation, held constant
/// after the last waypoint. Consecutive waypoints one frame apart model jumps.
struct Trajectory {
  std::vector<Waypoint> waypoints;  // strictly increasing frames, first at 0

  Pose at(int frame) const;
  /// First frame whose pose differs from frame 0, or `frame_count` if none.
  int first_motion_frame(int frame_count) const;
};

/// Camera rotation looking from `eye` at `target`: z forward, y down, world z up.
Eigen::Quaterniond look_at_rotation(const Vec3& eye, const Vec3& target);
/// Rz(yaw) * Ry(pitch) * Rx(roll), degrees.
Eigen::Quaterniond rpy_rotation(const Vec3& rpy_deg);

/// Textured rectangle, visible from the side its normal u x v points to.
struct PatchSpec {
  Vec3 center = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double half_u = 0.5;
  double half_v = 0.5;
  int points = 0;

  Vec3 normal() const { return axis_u.cross(axis_v).normalized(); }
};

/// Free feature points sampled uniformly inside a ball.
struct ClusterSpec {
  Vec3 center = Vec3::Zero();
  double radius = 0.05;
  int points = 0;
};

enum class EntityType { Static, Object };

struct EntitySpec {
  std::string name;
  EntityType type = EntityType::Static;
  std::vector<PatchSpec> patches;    // entity coordinates
  std::vector<ClusterSpec> clusters; // entity coordinates
  Trajectory trajectory;             // world-from-entity; objects only
};

struct NoiseSpec {
  double depth_coeff = 1.425e-3;  // sigma_Z(z) = depth_coeff * z^2 meters
  double pixel_sigma = 0.0;
  double descriptor_sigma = 0.0;  // per component, before renormalization
  double mismatch_rate = 0.0;
  double plane_angle_sigma_deg = 0.0;

  double sigma_z(double z) const { return depth_coeff * z * z; }
};

struct SegmentationSpec {
  double merge_prob = 0.0;
  double split_prob = 0.0;
  double adjacency_radius = 0.08;  // meters between closest members
};

struct Scenario {
  int schema_version = kScenarioSchemaVersion;
  std::string name;
  std::uint64_t seed = 0;
  int frame_count = 1;
  double frame_rate = 30.0;
  double max_depth = 4.0;
  CameraIntrinsics intrinsics;
  NoiseSpec noise;
  SegmentationSpec segmentation;
  std::vector<EntitySpec> entities;
  Trajectory camera;  // world-from-camera

  /// Throws ValidationError.
  void validate() const;
  int object_count() const;
};

/// Parses and validates scenario JSON. Syntax errors, wrong value types and
/// unknown keys raise ParseError carrying the offending line; semantic
/// problems raise ValidationError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace jslam
