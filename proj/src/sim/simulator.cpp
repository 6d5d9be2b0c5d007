#include "jslam/sim/simulator.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numeric>
#include <random>

#include "jslam/registration/registration.hpp"

namespace jslam {

const MeasurementTruth* FrameTruth::find(int measurement_id) const {
  auto it = std::lower_bound(measurements.begin(), measurements.end(), measurement_id,
                             [](const MeasurementTruth& m, int id) { return m.measurement_id < id; });
  return it != measurements.end() && it->measurement_id == measurement_id ? &*it : nullptr;
}

int FrameTruth::origin_of(int measurement_id) const {
  const MeasurementTruth* m = find(measurement_id);
  return m ? m->origin : -1;
}

const FrameTruth* GroundTruth::frame(int frame_index) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), frame_index,
                             [](const FrameTruth& f, int i) { return f.frame_index < i; });
  return it != frames.end() && it->frame_index == frame_index ? &*it : nullptr;
}

int GroundTruth::label_of(int frame_index, int measurement_id) const {
  const FrameTruth* f = frame(frame_index);
  const MeasurementTruth* m = f ? f->find(measurement_id) : nullptr;
  if (!m || m->entity < 0 || m->entity >= static_cast<int>(object_label.size())) return -1;
  return object_label[m->entity];
}

std::optional<Pose> GroundTruth::camera_in(int label, int frame_index) const {
  const FrameTruth* f = frame(frame_index);
  if (!f) return std::nullopt;
  if (label == 0) return f->camera;
  for (size_t e = 0; e < object_label.size() && e < f->entity_poses.size(); ++e)
    if (object_label[e] == label) return f->entity_poses[e].inverse() * f->camera;
  return std::nullopt;
}

namespace {

constexpr std::uint64_t kGeometryStream = 0x9e0;
constexpr std::uint64_t kFrameStream = 0xf4a3e;
constexpr double kNearPlane = 0.05;

Descriptor random_descriptor(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  DescriptorVector v;
  for (int i = 0; i < kDescriptorLength; ++i) v(i) = n(rng);
  return Descriptor(v);
}

Descriptor perturb(const Descriptor& d, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return d;
  std::normal_distribution<double> n(0.0, sigma);
  DescriptorVector v = d.values();
  for (int i = 0; i < kDescriptorLength; ++i) v(i) += n(rng);
  return Descriptor(v);
}

struct CameraPatch {
  Vec3 center, u, v, normal;
  double hu, hv;
  bool facing;
};

bool hidden(const Vec3& p, int own_patch, const std::vector<CameraPatch>& patches) {
  for (size_t i = 0; i < patches.size(); ++i) {
    if (static_cast<int>(i) == own_patch) continue;
    const CameraPatch& q = patches[i];
    const double denom = q.normal.dot(p);
    if (std::abs(denom) < 1e-12) continue;
    const double lambda = q.normal.dot(q.center) / denom;  // ray point lambda * p hits the patch plane
    if (!(lambda > 1e-6 && lambda < 1.0 - 1e-9)) continue;
    const Vec3 rel = lambda * p - q.center;
    if (std::abs(rel.dot(q.u)) <= q.hu && std::abs(rel.dot(q.v)) <= q.hv) return true;
  }
  return false;
}

double min_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double stop_below) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : a)
    for (const auto& y : b) {
      best = std::min(best, (x - y).squaredNorm());
      if (best < stop_below * stop_below) return std::sqrt(best);
    }
  return std::sqrt(best);
}

struct ProtoSegment {
  SegmentKind kind;
  std::vector<int> members;  // measurement ids
};

}  // namespace

World build_world(const Scenario& sc) {
  World w;
  std::mt19937_64 rng(mix_seed(sc.seed, kGeometryStream));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  int next_object = 1;
  for (size_t e = 0; e < sc.entities.size(); ++e) {
    const EntitySpec& spec = sc.entities[e];
    w.object_label.push_back(spec.type == EntityType::Object ? next_object++ : 0);
    w.first_motion_frame.push_back(spec.type == EntityType::Object ? spec.trajectory.first_motion_frame(sc.frame_count)
                                                                   : sc.frame_count);
    for (const auto& p : spec.patches) {
      WorldPatch wp;
      wp.entity = static_cast<int>(e);
      wp.spec = p;
      const int patch_index = static_cast<int>(w.patches.size());
      DescriptorVector sum = DescriptorVector::Zero();
      for (int i = 0; i < p.points; ++i) {
        WorldFeature f;
        f.id = static_cast<int>(w.features.size());
        f.entity = static_cast<int>(e);
        f.patch = patch_index;
        f.local = p.center + unit(rng) * p.half_u * p.axis_u + unit(rng) * p.half_v * p.axis_v;
        f.descriptor = random_descriptor(rng);
        sum += f.descriptor.values();
        w.features.push_back(f);
      }
      wp.descriptor = p.points > 0 ? Descriptor(sum) : random_descriptor(rng);
      w.patches.push_back(wp);
    }
    for (size_t c = 0; c < spec.clusters.size(); ++c) {
      const ClusterSpec& cl = spec.clusters[c];
      for (int i = 0; i < cl.points; ++i) {
        Vec3 off;
        do off = Vec3(unit(rng), unit(rng), unit(rng));
        while (off.squaredNorm() > 1.0);
        WorldFeature f;
        f.id = static_cast<int>(w.features.size());
        f.entity = static_cast<int>(e);
        f.cluster = static_cast<int>(c);
        f.local = cl.center + cl.radius * off;
        f.descriptor = random_descriptor(rng);
        w.features.push_back(f);
      }
    }
  }
  const int n_points = static_cast<int>(w.features.size());
  for (size_t i = 0; i < w.patches.size(); ++i) w.patches[i].id = n_points + static_cast<int>(i);
  return w;
}

SimulatedFrame synthesize_frame(const Scenario& sc, int t) { return synthesize_frame(sc, build_world(sc), t); }

SimulatedFrame synthesize_frame(const Scenario& sc, const World& world, int t) {
  std::mt19937_64 rng(mix_seed(sc.seed, kFrameStream + static_cast<std::uint64_t>(t)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const CameraIntrinsics& K = sc.intrinsics;

  SimulatedFrame out;
  Frame& frame = out.frame;
  FrameTruth& truth = out.truth;
  frame.index = t;
  frame.timestamp = t / sc.frame_rate;
  frame.intrinsics = K;
  truth.frame_index = t;
  truth.camera = sc.camera.at(t);
  for (const auto& e : sc.entities)
    truth.entity_poses.push_back(e.type == EntityType::Object ? e.trajectory.at(t) : Pose::identity());
  const Pose cam_from_world = truth.camera.inverse();

  auto origin_of_entity = [&](int e) { return t >= world.first_motion_frame[e] ? world.object_label[e] : 0; };

  // Patches in camera coordinates.
  std::vector<CameraPatch> cpatches;
  for (const auto& wp : world.patches) {
    const Pose T = cam_from_world * truth.entity_poses[wp.entity];
    const Mat3 R = T.rotation_matrix();
    CameraPatch c;
    c.center = T * wp.spec.center;
    c.u = R * wp.spec.axis_u;
    c.v = R * wp.spec.axis_v;
    c.normal = R * wp.spec.normal();
    c.hu = wp.spec.half_u;
    c.hv = wp.spec.half_v;
    c.facing = c.normal.dot(-c.center) > 0.0;
    cpatches.push_back(c);
  }

  struct Visible {
    const WorldFeature* f;
    Vec3 true_cam;
    Pixel pixel;
    bool has_depth;
  };
  std::vector<Visible> visible;
  for (const auto& f : world.features) {
    const Vec3 pc = cam_from_world * (truth.entity_poses[f.entity] * f.local);
    if (pc.z() <= kNearPlane) continue;
    const Pixel px = project(K, pc);
    if (!K.contains(px)) continue;
    if (f.patch >= 0 && !cpatches[f.patch].facing) continue;
    if (hidden(pc, f.patch, cpatches)) continue;
    visible.push_back({&f, pc, px, pc.z() <= sc.max_depth});
  }

  // Measurements: points in world-feature order, then planes in patch order.
  int next_id = 0;
  std::vector<std::vector<int>> patch_points(world.patches.size());
  std::vector<Vec3> positions;  // by measurement id, for segmentation (NaN for non-3D)
  std::vector<int> point_ids, plane_ids;
  std::vector<double> patch_depth_sum(world.patches.size(), 0.0);
  std::vector<std::pair<int, int>> depth_group;  // (entity, cluster or -1 - patch) per 3D point id
  for (const auto& v : visible) {
    const int id = next_id++;
    const double s_px = sc.noise.pixel_sigma;
    const Pixel noisy{v.pixel.u + s_px * gauss(rng), v.pixel.v + s_px * gauss(rng)};
    Descriptor d = perturb(v.f->descriptor, sc.noise.descriptor_sigma, rng);
    if (v.has_depth) {
      const double z = v.true_cam.z();
      const double noisy_z = z + sc.noise.sigma_z(z) * gauss(rng);
      const bool exact = s_px == 0.0 && sc.noise.depth_coeff == 0.0;
      const Vec3 p = exact ? v.true_cam : K.backproject(noisy, noisy_z);
      frame.measurements.push_back(Measurement::point3d(id, p, exact ? v.pixel : noisy, d));
      positions.push_back(p);
      if (v.f->patch >= 0) {
        patch_points[v.f->patch].push_back(id);
        patch_depth_sum[v.f->patch] += z;
      }
      point_ids.push_back(id);
    } else {
      frame.measurements.push_back(Measurement::point2d(id, s_px == 0.0 ? v.pixel : noisy, d));
      positions.push_back(Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
      point_ids.push_back(id);
    }
    truth.measurements.push_back({id, v.f->entity, origin_of_entity(v.f->entity), v.f->id});
  }
  std::vector<int> plane_of_patch(world.patches.size(), -1);
  for (size_t i = 0; i < world.patches.size(); ++i) {
    const auto& members = patch_points[i];
    if (!cpatches[i].facing || members.size() < 3) continue;
    const CameraPatch& c = cpatches[i];
    Vec3 n = c.normal;
    const double sa = sc.noise.plane_angle_sigma_deg * M_PI / 180.0;
    if (sa > 0.0) n = (n + sa * Vec3(gauss(rng), gauss(rng), gauss(rng))).normalized();
    const double mean_z = patch_depth_sum[i] / members.size();
    const double offset = -n.dot(c.center) + sc.noise.sigma_z(mean_z) / std::sqrt(double(members.size())) * gauss(rng);
    const int id = next_id++;
    const Descriptor d = perturb(world.patches[i].descriptor, sc.noise.descriptor_sigma, rng);
    frame.measurements.push_back(Measurement::plane_measurement(id, PlaneEq{n, offset}, d));
    positions.push_back(Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
    plane_ids.push_back(id);
    plane_of_patch[i] = id;
    const int e = world.patches[i].entity;
    truth.measurements.push_back({id, e, origin_of_entity(e), world.patches[i].id});
  }

  // Descriptor swaps within the point group and within the plane group.
  if (sc.noise.mismatch_rate > 0.0) {
    for (const auto* group : {&point_ids, &plane_ids}) {
      if (group->size() < 2) continue;
      std::uniform_int_distribution<size_t> pick(0, group->size() - 1);
      for (size_t i = 0; i < group->size(); ++i) {
        if (uniform(rng) >= 0.5 * sc.noise.mismatch_rate) continue;  // a swap corrupts two measurements
        size_t j = pick(rng);
        if (j == i) j = (j + 1) % group->size();
        std::swap(frame.measurements[(*group)[i]].descriptor, frame.measurements[(*group)[j]].descriptor);
      }
    }
  }

  // Segmentation: a plane-seeded segment per plane measurement, depth clusters
  // for the remaining 3D points grouped by entity and cluster (or patch).
  std::vector<ProtoSegment> segs;
  std::map<std::pair<int, int>, std::vector<int>> clusters;
  for (size_t i = 0; i < world.patches.size(); ++i) {
    if (plane_of_patch[i] < 0) continue;
    ProtoSegment s{SegmentKind::PlaneSeed, patch_points[i]};
    s.members.push_back(plane_of_patch[i]);
    segs.push_back(std::move(s));
  }
  for (size_t k = 0; k < visible.size(); ++k) {
    if (!visible[k].has_depth) continue;
    const WorldFeature& f = *visible[k].f;
    const int id = static_cast<int>(k);  // measurement ids of points follow `visible`
    if (f.patch >= 0 && plane_of_patch[f.patch] >= 0) continue;
    const int key = f.cluster >= 0 ? f.cluster : -1 - f.patch;
    clusters[{f.entity, key}].push_back(id);
  }
  std::vector<ProtoSegment> depth;
  for (auto& [key, members] : clusters) depth.push_back({SegmentKind::DepthCluster, members});

  // Corruption: split along the principal axis, then merge adjacent clusters.
  if (sc.segmentation.split_prob > 0.0) {
    std::vector<ProtoSegment> split;
    for (auto& s : depth) {
      if (s.members.size() >= 2 && uniform(rng) < sc.segmentation.split_prob) {
        Vec3 mean = Vec3::Zero();
        for (int id : s.members) mean += positions[id];
        mean /= double(s.members.size());
        Mat3 cov = Mat3::Zero();
        for (int id : s.members) cov += (positions[id] - mean) * (positions[id] - mean).transpose();
        const Vec3 axis = Eigen::SelfAdjointEigenSolver<Mat3>(cov).eigenvectors().col(2);
        std::vector<std::pair<double, int>> proj;
        for (int id : s.members) proj.emplace_back((positions[id] - mean).dot(axis), id);
        std::sort(proj.begin(), proj.end());
        ProtoSegment a{SegmentKind::DepthCluster, {}}, b{SegmentKind::DepthCluster, {}};
        for (size_t i = 0; i < proj.size(); ++i) (i < proj.size() / 2 ? a : b).members.push_back(proj[i].second);
        split.push_back(std::move(a));
        split.push_back(std::move(b));
      } else {
        split.push_back(std::move(s));
      }
    }
    depth = std::move(split);
  }
  auto member_positions = [&](const ProtoSegment& s) {
    std::vector<Vec3> pts;
    for (int id : s.members)
      if (positions[id].allFinite()) pts.push_back(positions[id]);
    return pts;
  };
  const double radius = sc.segmentation.adjacency_radius;
  if (sc.segmentation.merge_prob > 0.0 && depth.size() > 1) {
    std::vector<std::vector<Vec3>> pts;
    for (const auto& s : depth) pts.push_back(member_positions(s));
    std::vector<int> parent(depth.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (size_t a = 0; a < depth.size(); ++a)
      for (size_t b = a + 1; b < depth.size(); ++b) {
        if (min_distance(pts[a], pts[b], radius) >= radius) continue;
        if (uniform(rng) < sc.segmentation.merge_prob) parent[find(static_cast<int>(b))] = find(static_cast<int>(a));
      }
    std::map<int, ProtoSegment> merged;
    for (size_t a = 0; a < depth.size(); ++a) {
      auto& m = merged.try_emplace(find(static_cast<int>(a)), ProtoSegment{SegmentKind::DepthCluster, {}}).first->second;
      m.members.insert(m.members.end(), depth[a].members.begin(), depth[a].members.end());
    }
    depth.clear();
    for (auto& [root, s] : merged) depth.push_back(std::move(s));
  }
  for (auto& s : depth) segs.push_back(std::move(s));

  for (auto& s : segs) std::sort(s.members.begin(), s.members.end());
  std::sort(segs.begin(), segs.end(), [](const ProtoSegment& a, const ProtoSegment& b) { return a.members < b.members; });
  std::vector<std::vector<Vec3>> seg_pts;
  for (size_t i = 0; i < segs.size(); ++i) {
    Segment s;
    s.id = static_cast<int>(i);
    s.kind = segs[i].kind;
    s.member_ids = segs[i].members;
    std::map<int, int> votes;
    for (int id : s.member_ids) ++votes[truth.measurements[id].origin];
    int best = 0, best_count = -1;
    for (const auto& [origin, count] : votes)
      if (count > best_count) best = origin, best_count = count;
    truth.segment_origin[s.id] = best;
    frame.segments.push_back(std::move(s));
    seg_pts.push_back(member_positions(segs[i]));
  }
  for (size_t a = 0; a < segs.size(); ++a)
    for (size_t b = a + 1; b < segs.size(); ++b)
      if (min_distance(seg_pts[a], seg_pts[b], radius) < radius)
        frame.segment_adjacency.emplace_back(static_cast<int>(a), static_cast<int>(b));
  return out;
}

}  // namespace jslam
