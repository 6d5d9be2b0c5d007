#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "jslam/geometry/correspondence.hpp"
#include "jslam/geometry/pose.hpp"
#include "jslam/geometry/primitives.hpp"

namespace jslam {

inline constexpr int kDescriptorLength = 32;
using DescriptorVector = Eigen::Matrix<double, kDescriptorLength, 1>;

/// Unit-norm appearance descriptor.
class Descriptor {
 public:
  Descriptor() { values_.setZero(); values_(0) = 1.0; }
  /// Normalizes `v`; a zero vector yields the first basis vector.
  explicit Descriptor(const DescriptorVector& v);

  const DescriptorVector& values() const { return values_; }
  double distance(const Descriptor& other) const { return (values_ - other.values_).norm(); }

 private:
  DescriptorVector values_;
};

/// Normalized mean; the first basis vector when `descs` is empty.
Descriptor mean_descriptor(std::span<const Descriptor> descs);

struct Measurement {
  int id = -1;
  FeatureKind kind = FeatureKind::Point3D;
  Vec3 position = Vec3::Zero();  // Point3D only, frame coordinates
  Pixel pixel;                   // Point3D and Point2D
  PlaneEq plane;                 // Plane only
  Descriptor descriptor;

  static Measurement point3d(int id, const Vec3& position, const Pixel& pixel, const Descriptor& d);
  static Measurement point2d(int id, const Pixel& pixel, const Descriptor& d);
  static Measurement plane_measurement(int id, const PlaneEq& plane, const Descriptor& d);

  bool is_point() const { return kind != FeatureKind::Plane; }
  /// Depth used for the 3D inlier threshold (|offset| for planes, 0 for 2D).
  double depth() const;
};

enum class SegmentKind { PlaneSeed, DepthCluster };

struct Segment {
  int id = -1;
  SegmentKind kind = SegmentKind::DepthCluster;
  std::vector<int> member_ids;  // sorted ascending

  bool contains(int measurement_id) const;
};

struct Frame {
  int index = 0;
  double timestamp = 0.0;
  CameraIntrinsics intrinsics;
  std::vector<Measurement> measurements;  // sorted by id
  std::vector<Segment> segments;
  std::vector<std::pair<int, int>> segment_adjacency;  // spatially adjacent segment ids

  const Measurement* find(int measurement_id) const;
  const Segment* find_segment(int segment_id) const;

  /// Throws ValidationError on duplicate ids, overlapping segments, a dangling
  /// member id, or a PlaneSeed without exactly one plane.
  void validate() const;
};

struct Observation {
  int keyframe = 0;  // index into WorldMap::keyframes
  int measurement_id = -1;
};

struct Landmark {
  int id = -1;
  FeatureKind kind = FeatureKind::Point3D;  // Point3D or Plane
  Vec3 position = Vec3::Zero();
  PlaneEq plane;
  Descriptor descriptor;  // descriptor of the creating observation
  std::vector<Observation> observations;
};

struct Keyframe {
  int frame_index = 0;
  double timestamp = 0.0;
  Pose pose;  // keyframe camera in map coordinates
  std::vector<Measurement> measurements;  // sorted by id
  CameraIntrinsics intrinsics;

  const Measurement* find(int measurement_id) const;
};

struct MapSegment {
  int id = -1;
  int keyframe = 0;
  std::vector<int> landmark_ids;
};

enum class MapKind { Static, Object };

struct WorldMap {
  int id = 0;
  MapKind kind = MapKind::Static;
  std::vector<Landmark> landmarks;  // sorted by id
  std::vector<Keyframe> keyframes;
  std::vector<MapSegment> segments;  // Object maps only
  std::uint64_t version = 0;

  const Landmark* find_landmark(int landmark_id) const;
  Landmark* find_landmark(int landmark_id);
  /// Landmarks observed by any of the last `n` keyframes, ascending id.
  std::vector<const Landmark*> landmarks_in_last_keyframes(int n) const;
  std::size_t count(FeatureKind kind) const;

  /// Throws ValidationError when an invariant of the map is broken.
  void validate() const;
};

/// Immutable view handed to registration and bundle adjustment.
using MapSnapshot = std::shared_ptr<const WorldMap>;

/// Pairs a measurement with a landmark when their kinds are compatible.
std::optional<Correspondence> make_correspondence(const Measurement& m, const Landmark& l);

/// d(T(m), l); throws KindMismatch for incompatible kinds.
FeatureDistance feature_distance(const Pose& frame_in_map, const Measurement& m, const Landmark& l,
                                 const CameraIntrinsics& K);

}  // namespace jslam
