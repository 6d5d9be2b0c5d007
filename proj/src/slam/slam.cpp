#include "jslam/slam/slam.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "jslam/common/error.hpp"
#include "jslam/scene/appearance_index.hpp"
#include "jslam/scene/matching.hpp"

namespace jslam {

void DetectionConfig::validate() const {
  if (!(outlier_ratio_threshold > 0.0 && outlier_ratio_threshold < 1.0))
    throw ValidationError("outlier_ratio_threshold must lie in (0, 1)");
  if (min_segment_size < 1) throw ValidationError("min_segment_size must be positive");
  if (!(keyframe_translation > 0.0) || !(keyframe_rotation > 0.0))
    throw ValidationError("keyframe thresholds must be positive");
}

void SlamConfig::validate() const {
  ransac.validate();
  detection.validate();
  if (keyframe_window < 1) throw ValidationError("keyframe_window must be at least 1");
  if (!(novelty_distance > 0.0)) throw ValidationError("novelty_distance must be positive");
  if (!(segment_coverage > 0.0 && segment_coverage <= 1.0)) throw ValidationError("segment_coverage must lie in (0, 1]");
  if (ba.merge_lag < 0 || ba.options.max_iterations < 1) throw ValidationError("invalid bundle adjustment schedule");
}

int FrameOutcome::map_of(int measurement_id) const {
  for (const auto& [id, cell] : partition)
    if (std::binary_search(cell.begin(), cell.end(), measurement_id)) return id;
  return -1;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<std::vector<int>> detect_moving_objects(const Frame& frame, const RegistrationResult& static_result,
                                                    const std::set<int>& unclaimed,
                                                    const std::set<int>& object_matched,
                                                    const DetectionConfig& cfg) {
  if (!static_result.ok()) return {};
  const std::set<int> matched(static_result.matched_ids.begin(), static_result.matched_ids.end());

  std::vector<int> flagged;  // indices into frame.segments
  for (size_t i = 0; i < frame.segments.size(); ++i) {
    const Segment& s = frame.segments[i];
    const int size = static_cast<int>(s.member_ids.size());
    if (size < cfg.min_segment_size) continue;
    if (!std::all_of(s.member_ids.begin(), s.member_ids.end(), [&](int id) { return unclaimed.count(id) > 0; }))
      continue;
    int outliers = 0;
    for (int id : s.member_ids)
      if (matched.count(id) && !static_result.is_inlier(id) && !object_matched.count(id)) ++outliers;
    if (double(outliers) / size > cfg.outlier_ratio_threshold) flagged.push_back(static_cast<int>(i));
  }
  if (flagged.empty()) return {};

  std::unordered_map<int, int> slot;  // segment id -> index into flagged
  for (size_t k = 0; k < flagged.size(); ++k) slot[frame.segments[flagged[k]].id] = static_cast<int>(k);
  UnionFind uf(static_cast<int>(flagged.size()));
  for (const auto& [a, b] : frame.segment_adjacency) {
    const auto ia = slot.find(a), ib = slot.find(b);
    if (ia != slot.end() && ib != slot.end()) uf.unite(ia->second, ib->second);
  }
  std::map<int, std::vector<int>> groups;
  for (size_t k = 0; k < flagged.size(); ++k)
    groups[uf.find(static_cast<int>(k))].push_back(frame.segments[flagged[k]].id);
  std::vector<std::vector<int>> out;
  for (auto& [root, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    out.push_back(ids);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Partition classify_features(const Frame& frame, const std::map<int, RegistrationResult>& object_results) {
  Partition p;
  p[0];
  std::unordered_map<int, int> segment_of;
  for (const auto& s : frame.segments)
    for (int id : s.member_ids) segment_of[id] = s.id;

  struct Claim {
    int map_id;
    const RegistrationResult* r;
  };
  std::vector<Claim> live;
  for (const auto& [id, r] : object_results) {
    if (id == 0 || !r.ok()) continue;
    p[id];
    live.push_back({id, &r});
  }
  auto better = [](const Claim& a, const Claim& b) {
    if (a.r->inlier_ids.size() != b.r->inlier_ids.size()) return a.r->inlier_ids.size() > b.r->inlier_ids.size();
    return a.map_id < b.map_id;
  };

  for (const auto& m : frame.measurements) {
    const Claim* by_segment = nullptr;
    const Claim* by_inlier = nullptr;
    const auto seg = segment_of.find(m.id);
    for (const Claim& c : live) {
      if (seg != segment_of.end() &&
          std::binary_search(c.r->matched_segment_ids.begin(), c.r->matched_segment_ids.end(), seg->second) &&
          (!by_segment || better(c, *by_segment)))
        by_segment = &c;
      if (c.r->is_inlier(m.id) && (!by_inlier || better(c, *by_inlier))) by_inlier = &c;
    }
    const int owner = by_segment ? by_segment->map_id : by_inlier ? by_inlier->map_id : 0;
    p[owner].push_back(m.id);
  }
  return p;
}

bool decide_keyframe(const Pose& pose, const WorldMap& map, const DetectionConfig& cfg) {
  const double max_rot = cfg.keyframe_rotation * M_PI / 180.0;
  for (const auto& kf : map.keyframes) {
    const PoseDelta d = pose_difference(pose, kf.pose);
    if (!(d.translation > cfg.keyframe_translation || d.angle_rad > max_rot)) return false;
  }
  return true;
}

MapUpdateReport update_map(WorldMap& map, const Frame& frame, const std::vector<int>& cell, const Pose& pose,
                           const CorrespondenceList& inliers, const SlamConfig& cfg, IdAllocator& ids) {
  MapUpdateReport rep;
  if (!decide_keyframe(pose, map, cfg.detection)) return rep;

  const std::set<int> in_cell(cell.begin(), cell.end());
  Keyframe kf;
  kf.frame_index = frame.index;
  kf.timestamp = frame.timestamp;
  kf.pose = pose;
  kf.intrinsics = frame.intrinsics;
  for (const auto& m : frame.measurements)
    if (in_cell.count(m.id)) kf.measurements.push_back(m);
  const int k = static_cast<int>(map.keyframes.size());

  std::unordered_map<int, int> linked;  // measurement id -> landmark id
  for (const auto& c : inliers) {
    if (!in_cell.count(c.measurement_id)) continue;
    Landmark* l = map.find_landmark(c.landmark_id);
    if (!l) continue;
    l->observations.push_back({k, c.measurement_id});
    linked[c.measurement_id] = l->id;
    ++rep.observations_added;
  }

  std::vector<const Measurement*> fresh;
  for (const auto& m : kf.measurements)
    if (m.kind != FeatureKind::Point2D && !linked.count(m.id)) fresh.push_back(&m);
  std::vector<const Landmark*> existing;
  existing.reserve(map.landmarks.size());
  for (const auto& l : map.landmarks) existing.push_back(&l);
  const std::vector<double> nearest = nearest_descriptor_distances(fresh, existing);

  std::vector<Landmark> created;
  for (size_t i = 0; i < fresh.size(); ++i) {
    if (!(nearest[i] > cfg.novelty_distance)) continue;
    const Measurement& m = *fresh[i];
    Landmark l;
    l.id = ids.next();
    l.kind = m.kind;
    if (m.kind == FeatureKind::Plane)
      l.plane = transform_plane(pose, m.plane);
    else
      l.position = pose * m.position;
    l.descriptor = m.descriptor;
    l.observations.push_back({k, m.id});
    linked[m.id] = l.id;
    created.push_back(std::move(l));
  }
  rep.landmarks_created = static_cast<int>(created.size());
  for (auto& l : created) map.landmarks.push_back(std::move(l));  // fresh ids exceed every existing one

  if (map.kind == MapKind::Object) {
    for (const auto& s : frame.segments) {
      int inside = 0;
      for (int id : s.member_ids) inside += in_cell.count(id) ? 1 : 0;
      if (inside == 0 || inside < cfg.segment_coverage * s.member_ids.size()) continue;
      MapSegment ms;
      ms.id = map.segments.empty() ? 0 : map.segments.back().id + 1;
      ms.keyframe = k;
      for (int id : s.member_ids) {
        const auto it = linked.find(id);
        if (it != linked.end()) ms.landmark_ids.push_back(it->second);
      }
      if (ms.landmark_ids.empty()) continue;
      std::sort(ms.landmark_ids.begin(), ms.landmark_ids.end());
      map.segments.push_back(std::move(ms));
      ++rep.segments_recorded;
    }
  }
  map.keyframes.push_back(std::move(kf));
  rep.keyframe_index = k;
  ++map.version;
  return rep;
}

SlamSystem::SlamSystem(SlamConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

SlamSystem::~SlamSystem() {
  for (auto& [id, job] : ba_jobs_) {
    try {
      job.result.get();
    } catch (...) {
    }
  }
}

std::vector<MapSnapshot> SlamSystem::maps() const {
  std::vector<MapSnapshot> out;
  for (const auto& [id, m] : maps_) out.push_back(m);
  return out;
}

MapSnapshot SlamSystem::map(int id) const {
  const auto it = maps_.find(id);
  return it == maps_.end() ? nullptr : it->second;
}

RansacConfig SlamSystem::ransac_for(int frame_index, int map_id) const {
  RansacConfig r = cfg_.ransac;
  r.rng_seed = mix_seed(cfg_.ransac.rng_seed, (static_cast<std::uint64_t>(frame_index) << 16) + map_id);
  return r;
}

void SlamSystem::initialize_static(const Frame& frame, FrameOutcome& out) {
  auto m = std::make_shared<WorldMap>();
  m->id = next_map_id_++;
  m->kind = MapKind::Static;
  Keyframe kf;
  kf.frame_index = frame.index;
  kf.timestamp = frame.timestamp;
  kf.intrinsics = frame.intrinsics;
  kf.measurements = frame.measurements;
  m->keyframes.push_back(kf);
  std::vector<int> all;
  for (const auto& meas : frame.measurements) {
    all.push_back(meas.id);
    if (meas.kind == FeatureKind::Point2D) continue;
    Landmark l;
    l.id = landmark_ids_.next();
    l.kind = meas.kind;
    l.position = meas.position;
    l.plane = meas.plane;
    l.descriptor = meas.descriptor;
    l.observations.push_back({0, meas.id});
    m->landmarks.push_back(l);
  }
  m->version = 1;
  maps_[m->id] = m;

  RegistrationResult r;
  r.status = RegistrationStatus::Success;
  r.reason = FailureReason::None;
  r.source = RegistrationSource::Initialization;
  r.pose = Pose::identity();
  r.inlier_ids = all;
  r.matched_ids = all;
  r.match_count = static_cast<int>(all.size());
  out.results[m->id] = r;
  out.partition[m->id] = all;
  out.keyframes_added.push_back({m->id, 0});
}

int SlamSystem::seed_object_map(const Frame& frame, const std::vector<int>& segment_ids, FrameOutcome& out) {
  auto m = std::make_shared<WorldMap>();
  m->id = next_map_id_++;
  m->kind = MapKind::Object;

  std::set<int> members;
  for (int sid : segment_ids)
    if (const Segment* s = frame.find_segment(sid)) members.insert(s->member_ids.begin(), s->member_ids.end());

  Keyframe kf;
  kf.frame_index = frame.index;
  kf.timestamp = frame.timestamp;
  kf.intrinsics = frame.intrinsics;
  std::unordered_map<int, int> linked;
  for (const auto& meas : frame.measurements) {
    if (!members.count(meas.id)) continue;
    kf.measurements.push_back(meas);
    if (meas.kind == FeatureKind::Point2D) continue;
    Landmark l;
    l.id = landmark_ids_.next();
    l.kind = meas.kind;
    l.position = meas.position;
    l.plane = meas.plane;
    l.descriptor = meas.descriptor;
    l.observations.push_back({0, meas.id});
    linked[meas.id] = l.id;
    m->landmarks.push_back(l);
  }
  m->keyframes.push_back(kf);
  for (int sid : segment_ids) {
    const Segment* s = frame.find_segment(sid);
    MapSegment ms;
    ms.id = static_cast<int>(m->segments.size());
    ms.keyframe = 0;
    for (int id : s->member_ids)
      if (linked.count(id)) ms.landmark_ids.push_back(linked[id]);
    std::sort(ms.landmark_ids.begin(), ms.landmark_ids.end());
    if (!ms.landmark_ids.empty()) m->segments.push_back(ms);
  }
  m->version = 1;
  maps_[m->id] = m;

  // move the seed from the static cell into the new map's cell
  auto& stat = out.partition[0];
  stat.erase(std::remove_if(stat.begin(), stat.end(), [&](int id) { return members.count(id) > 0; }), stat.end());
  out.partition[m->id] = std::vector<int>(members.begin(), members.end());

  RegistrationResult r;
  r.status = RegistrationStatus::Success;
  r.reason = FailureReason::None;
  r.source = RegistrationSource::Initialization;
  r.pose = Pose::identity();
  r.inlier_ids = out.partition[m->id];
  r.matched_ids = r.inlier_ids;
  r.matched_segment_ids = segment_ids;
  r.match_count = static_cast<int>(r.inlier_ids.size());
  out.results[m->id] = r;
  out.new_object_map_ids.push_back(m->id);
  out.keyframes_added.push_back({m->id, 0});
  return m->id;
}

int SlamSystem::adjacent_object_map(const Frame& frame, const std::vector<int>& group, const FrameOutcome& out) const {
  // owner of each segment: the object map holding most of its members
  std::map<int, int> owner;
  for (const auto& s : frame.segments) {
    std::map<int, int> votes;
    for (int id : s.member_ids) {
      const int m = out.map_of(id);
      if (m > 0) ++votes[m];
    }
    for (const auto& [m, n] : votes)
      if (2 * n > static_cast<int>(s.member_ids.size())) owner[s.id] = m;
  }
  const std::set<int> in_group(group.begin(), group.end());
  std::map<int, int> contacts;
  for (const auto& [a, b] : frame.segment_adjacency) {
    if (in_group.count(a) && owner.count(b)) ++contacts[owner[b]];
    if (in_group.count(b) && owner.count(a)) ++contacts[owner[a]];
  }
  int best = 0, best_n = 0;
  for (const auto& [m, n] : contacts)
    if (n > best_n) best = m, best_n = n;
  return best;
}

void SlamSystem::absorb_group(const Frame& frame, const std::vector<int>& group, int map_id, FrameOutcome& out) {
  std::set<int> members;
  for (int sid : group)
    if (const Segment* s = frame.find_segment(sid)) members.insert(s->member_ids.begin(), s->member_ids.end());
  auto& stat = out.partition[0];
  stat.erase(std::remove_if(stat.begin(), stat.end(), [&](int id) { return members.count(id) > 0; }), stat.end());
  auto& cell = out.partition[map_id];
  cell.insert(cell.end(), members.begin(), members.end());
  std::sort(cell.begin(), cell.end());
}

void SlamSystem::schedule_ba(int map_id, int frame_index) {
  if (!cfg_.ba.enabled) {
    ba_dirty_.erase(map_id);
    return;
  }
  if (ba_jobs_.count(map_id)) {
    ba_dirty_.insert(map_id);
    return;
  }
  ba_dirty_.erase(map_id);
  MapSnapshot snap = maps_.at(map_id);
  if (snap->keyframes.size() < 2) return;
  const InlierThresholds th = cfg_.ransac.thresholds;
  const BaOptions opts = cfg_.ba.options;
  auto task = [snap, th, opts]() {
    BaProblem p = build_problem(*snap, th);
    optimize(p, opts);
    return p;
  };
  BaJob job;
  job.due_frame = frame_index + 1 + cfg_.ba.merge_lag;
  job.result = std::async(cfg_.ba.async ? std::launch::async : std::launch::deferred, task);
  ba_jobs_.emplace(map_id, std::move(job));
}

void SlamSystem::merge_due(int frame_index, bool all) {
  for (auto it = ba_jobs_.begin(); it != ba_jobs_.end();) {
    if (!all && it->second.due_frame > frame_index) {
      ++it;
      continue;
    }
    try {
      const BaProblem refined = it->second.result.get();
      auto copy = std::make_shared<WorldMap>(*maps_.at(it->first));
      merge_refinement(*copy, refined);
      maps_[it->first] = copy;
      ++ba_runs_;
    } catch (const Error&) {
      // a failed refinement leaves the live map as it is
    }
    it = ba_jobs_.erase(it);
  }
}

void SlamSystem::finish() {
  merge_due(0, true);
  while (!ba_dirty_.empty()) {
    const std::set<int> dirty = ba_dirty_;
    for (int id : dirty) schedule_ba(id, 0);
    merge_due(0, true);
  }
}

FrameOutcome SlamSystem::process_frame(const Frame& frame) {
  frame.validate();
  merge_due(frame.index, false);

  FrameOutcome out;
  out.frame_index = frame.index;
  out.timestamp = frame.timestamp;

  if (maps_.empty()) {
    initialize_static(frame, out);
  } else {
    const int window = cfg_.keyframe_window;
    RegistrationResult static_res;
    try {
      static_res = register_frame(frame, *maps_.at(0), window, ransac_for(frame.index, 0));
    } catch (const Error& e) {
      out.errors.push_back(std::string("static registration: ") + e.what());
    }

    std::map<int, RegistrationResult> object_results;
    for (const auto& [id, snap] : maps_) {
      if (id == 0) continue;
      const RansacConfig rc = ransac_for(frame.index, id);
      try {
        const RegistrationResult fb = register_frame(frame, *snap, window, rc);
        std::vector<RegistrationResult> segs;
        if (!snap->segments.empty()) {
          const SegmentIndex index = build_appearance_index(*snap);
          for (const auto& s : frame.segments) {
            if (static_cast<int>(s.member_ids.size()) < rc.relaxed_min_matches()) continue;
            segs.push_back(register_segment(s, frame, *snap, index, rc));
          }
        }
        object_results[id] = fuse_results(fb, segs, frame.intrinsics, rc);
      } catch (const Error& e) {
        out.errors.push_back("object map " + std::to_string(id) + " registration: " + e.what());
        object_results[id] = RegistrationResult::failure(FailureReason::NoValidHypothesis, RegistrationSource::FrameBased);
      }
    }

    out.partition = classify_features(frame, object_results);
    out.static_tracking_lost = !static_res.ok();
    out.results = object_results;
    out.results[0] = static_res;

    if (static_res.ok()) {
      const std::set<int> unclaimed(out.partition[0].begin(), out.partition[0].end());
      std::set<int> object_matched;
      for (const auto& [id, r] : object_results) object_matched.insert(r.matched_ids.begin(), r.matched_ids.end());
      for (const auto& group : detect_moving_objects(frame, static_res, unclaimed, object_matched, cfg_.detection)) {
        const int host = adjacent_object_map(frame, group, out);
        if (host > 0)
          absorb_group(frame, group, host, out);
        else
          seed_object_map(frame, group, out);
      }
    }

    for (const auto& [id, r] : out.results) {
      if (!r.ok() || r.source == RegistrationSource::Initialization) continue;
      auto copy = std::make_shared<WorldMap>(*maps_.at(id));
      const MapUpdateReport rep = update_map(*copy, frame, out.partition[id], *r.pose, r.inliers, cfg_, landmark_ids_);
      if (rep.keyframe_index < 0) continue;
      maps_[id] = copy;
      out.keyframes_added.push_back({id, rep.keyframe_index});
    }
  }

  for (const auto& [id, r] : out.results)
    if (r.ok()) trajectories_[id].push_back({frame.index, frame.timestamp, *r.pose});
  for (const auto& [id, m] : maps_)
    growth_.push_back({frame.index, id, static_cast<int>(m->keyframes.size()), static_cast<int>(m->landmarks.size())});

  for (const auto& k : out.keyframes_added) ba_dirty_.insert(k.map_id);
  const std::set<int> dirty = ba_dirty_;
  for (int id : dirty)
    if (!ba_jobs_.count(id)) schedule_ba(id, frame.index);
  return out;
}

}  // namespace jslam
