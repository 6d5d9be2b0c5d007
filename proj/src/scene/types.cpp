#include "jslam/scene/types.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "jslam/common/error.hpp"

namespace jslam {

Descriptor::Descriptor(const DescriptorVector& v) {
  const double n = v.norm();
  if (n > 0.0) {
    values_ = v / n;
  } else {
    values_.setZero();
    values_(0) = 1.0;
  }
}

Descriptor mean_descriptor(std::span<const Descriptor> descs) {
  DescriptorVector sum = DescriptorVector::Zero();
  for (const auto& d : descs) sum += d.values();
  return Descriptor(sum);
}

Measurement Measurement::point3d(int id, const Vec3& position, const Pixel& pixel, const Descriptor& d) {
  Measurement m;
  m.id = id;
  m.kind = FeatureKind::Point3D;
  m.position = position;
  m.pixel = pixel;
  m.descriptor = d;
  return m;
}

Measurement Measurement::point2d(int id, const Pixel& pixel, const Descriptor& d) {
  Measurement m;
  m.id = id;
  m.kind = FeatureKind::Point2D;
  m.pixel = pixel;
  m.descriptor = d;
  return m;
}

Measurement Measurement::plane_measurement(int id, const PlaneEq& plane, const Descriptor& d) {
  Measurement m;
  m.id = id;
  m.kind = FeatureKind::Plane;
  m.plane = plane.canonicalized();
  m.descriptor = d;
  return m;
}

double Measurement::depth() const {
  switch (kind) {
    case FeatureKind::Point3D: return position.z();
    case FeatureKind::Plane: return std::abs(plane.offset);
    case FeatureKind::Point2D: return 0.0;
  }
  return 0.0;
}

bool Segment::contains(int measurement_id) const {
  return std::binary_search(member_ids.begin(), member_ids.end(), measurement_id);
}

namespace {

template <typename Vec>
auto find_by_id(Vec& items, int id) -> decltype(&items.front()) {
  auto it = std::lower_bound(items.begin(), items.end(), id,
                             [](const auto& item, int value) { return item.id < value; });
  if (it == items.end() || it->id != id) return nullptr;
  return &*it;
}

}  // namespace

const Measurement* Frame::find(int measurement_id) const { return find_by_id(measurements, measurement_id); }

const Segment* Frame::find_segment(int segment_id) const {
  for (const auto& s : segments)
    if (s.id == segment_id) return &s;
  return nullptr;
}

void Frame::validate() const {
  for (size_t i = 1; i < measurements.size(); ++i) {
    if (measurements[i].id <= measurements[i - 1].id)
      throw ValidationError("frame " + std::to_string(index) + ": measurement ids not strictly increasing");
  }
  std::set<int> seen_members, seen_segments;
  for (const auto& s : segments) {
    if (!seen_segments.insert(s.id).second)
      throw ValidationError("frame " + std::to_string(index) + ": duplicate segment id " + std::to_string(s.id));
    if (!std::is_sorted(s.member_ids.begin(), s.member_ids.end()))
      throw ValidationError("segment members must be sorted");
    int planes = 0;
    for (int id : s.member_ids) {
      const Measurement* m = find(id);
      if (!m) throw ValidationError("segment " + std::to_string(s.id) + " references unknown measurement");
      if (m->kind == FeatureKind::Point2D) throw ValidationError("segments hold 3D points and planes only");
      if (m->kind == FeatureKind::Plane) ++planes;
      if (!seen_members.insert(id).second)
        throw ValidationError("segments overlap on measurement " + std::to_string(id));
    }
    if (s.kind == SegmentKind::PlaneSeed && planes != 1)
      throw ValidationError("plane-seeded segment must contain exactly one plane");
  }
}

const Measurement* Keyframe::find(int measurement_id) const { return find_by_id(measurements, measurement_id); }

const Landmark* WorldMap::find_landmark(int landmark_id) const { return find_by_id(landmarks, landmark_id); }
Landmark* WorldMap::find_landmark(int landmark_id) { return find_by_id(landmarks, landmark_id); }

std::vector<const Landmark*> WorldMap::landmarks_in_last_keyframes(int n) const {
  const int first = std::max(0, static_cast<int>(keyframes.size()) - n);
  std::vector<const Landmark*> out;
  for (const auto& l : landmarks) {
    for (const auto& o : l.observations) {
      if (o.keyframe >= first) {
        out.push_back(&l);
        break;
      }
    }
  }
  return out;
}

std::size_t WorldMap::count(FeatureKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(landmarks.begin(), landmarks.end(), [&](const Landmark& l) { return l.kind == kind; }));
}

void WorldMap::validate() const {
  if (!keyframes.empty()) {
    const Pose& g = keyframes.front().pose;
    if (g.rotation_angle() != 0.0 || g.translation().norm() != 0.0)
      throw ValidationError("keyframe 0 must be the identity");
  }
  if (kind == MapKind::Static && !segments.empty()) throw ValidationError("static maps hold no segments");
  for (size_t i = 0; i < landmarks.size(); ++i) {
    const Landmark& l = landmarks[i];
    if (i > 0 && l.id <= landmarks[i - 1].id) throw ValidationError("landmark ids not increasing");
    if (l.observations.empty()) throw ValidationError("landmark without observations");
    if (l.kind == FeatureKind::Point2D) throw ValidationError("2D landmarks are not allowed");
    for (const auto& o : l.observations) {
      if (o.keyframe < 0 || o.keyframe >= static_cast<int>(keyframes.size()))
        throw ValidationError("observation references a missing keyframe");
      if (!keyframes[o.keyframe].find(o.measurement_id))
        throw ValidationError("observation references a missing measurement");
    }
    if (!l.position.allFinite() || !l.plane.normal.allFinite()) throw ValidationError("non-finite landmark");
  }
}

std::optional<Correspondence> make_correspondence(const Measurement& m, const Landmark& l) {
  switch (m.kind) {
    case FeatureKind::Point3D:
      if (l.kind != FeatureKind::Point3D) return std::nullopt;
      return Correspondence::point_point(m.position, l.position, m.id, l.id);
    case FeatureKind::Point2D:
      if (l.kind != FeatureKind::Point3D) return std::nullopt;
      return Correspondence::pixel_point(m.pixel, l.position, m.id, l.id);
    case FeatureKind::Plane:
      if (l.kind != FeatureKind::Plane) return std::nullopt;
      return Correspondence::plane_plane(m.plane, l.plane, m.id, l.id);
  }
  return std::nullopt;
}

FeatureDistance feature_distance(const Pose& frame_in_map, const Measurement& m, const Landmark& l,
                                 const CameraIntrinsics& K) {
  const auto c = make_correspondence(m, l);
  if (!c)
    throw KindMismatch(std::string("cannot compare ") + to_string(m.kind) + " measurement with " +
                       to_string(l.kind) + " landmark");
  return feature_distance(frame_in_map, *c, K);
}

}  // namespace jslam
