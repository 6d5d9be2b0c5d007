#pragma once

#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "jslam/ba/bundle_adjustment.hpp"
#include "jslam/registration/registration.hpp"
#include "jslam/scene/types.hpp"

namespace jslam {

struct DetectionConfig {
  double outlier_ratio_threshold = 0.5;
  int min_segment_size = 15;
  double keyframe_translation = 0.10;  // meters
  double keyframe_rotation = 10.0;     // degrees

  void validate() const;
};

struct BaSchedule {
  bool enabled = true;
  bool async = true;
  // A job launched after frame f is merged before frame f + 1 + merge_lag.
  int merge_lag = 1;
  BaOptions options;
};

struct SlamConfig {
  RansacConfig ransac;
  DetectionConfig detection;
  int keyframe_window = 5;        // N: landmarks of the last N keyframes are matched
  double novelty_distance = 0.7;  // descriptor distance above which a measurement is new to a map
  double segment_coverage = 0.5;  // share of a segment that must belong to an object to become a map segment
  BaSchedule ba;

  void validate() const;
};

// Measurement ids per map id. Cells are disjoint and cover the whole frame.
using Partition = std::map<int, std::vector<int>>;

struct KeyframeAdded {
  int map_id = 0;
  int keyframe_index = 0;
};

struct FrameOutcome {
  int frame_index = 0;
  double timestamp = 0.0;
  std::map<int, RegistrationResult> results;  // per map id, including maps seeded here
  Partition partition;
  std::vector<int> new_object_map_ids;
  std::vector<KeyframeAdded> keyframes_added;
  bool static_tracking_lost = false;
  std::vector<std::string> errors;

  /// Map id owning the measurement, -1 if absent.
  int map_of(int measurement_id) const;
};

/// Groups of segment ids, each seeding one object map. Only segments wholly
/// inside `unclaimed` and of at least `min_segment_size` members qualify. A
/// member counts as an outlier when it was descriptor-matched to the static
/// map, is not a static inlier, and was not matched to any object map
/// (`object_matched`). Adjacent flagged segments form one group.
std::vector<std::vector<int>> detect_moving_objects(const Frame& frame, const RegistrationResult& static_result,
                                                    const std::set<int>& unclaimed,
                                                    const std::set<int>& object_matched,
                                                    const DetectionConfig& cfg);

/// Per-measurement priority: matched object segment, then object inlier,
/// then static. Ties between object maps go to the larger inlier set, then
/// the lower map id. Failed registrations claim nothing.
Partition classify_features(const Frame& frame, const std::map<int, RegistrationResult>& object_results);

/// True iff the pose differs from every keyframe by more than the translation
/// or the rotation threshold. An empty map always wants a keyframe.
bool decide_keyframe(const Pose& pose, const WorldMap& map, const DetectionConfig& cfg);

struct MapUpdateReport {
  int keyframe_index = -1;  // -1 when no keyframe was added
  int observations_added = 0;
  int landmarks_created = 0;
  int segments_recorded = 0;
};

// Process-wide landmark id source shared by all maps so ids never collide.
class IdAllocator {
 public:
  int next() { return next_++; }
  int peek() const { return next_; }

 private:
  int next_ = 0;
};

/// Keyframe insertion with its observations, new landmarks and (object maps)
/// map segments. `cell` are the measurement ids assigned to the map, `inliers`
/// its inlier pairs. Leaves the map untouched when no keyframe is warranted.
MapUpdateReport update_map(WorldMap& map, const Frame& frame, const std::vector<int>& cell, const Pose& pose,
                           const CorrespondenceList& inliers, const SlamConfig& cfg, IdAllocator& ids);

struct TrajectoryEntry {
  int frame_index = 0;
  double timestamp = 0.0;
  Pose pose;  // frame-in-map
};

struct GrowthEntry {
  int frame_index = 0;
  int map_id = 0;
  int keyframes = 0;
  int landmarks = 0;
};

/// The per-frame pipeline over one static map (id 0) and any number of object
/// maps. Maps are immutable snapshots replaced on write, so bundle adjustment
/// can read them from another thread.
class SlamSystem {
 public:
  explicit SlamSystem(SlamConfig cfg = {});
  ~SlamSystem();
  SlamSystem(const SlamSystem&) = delete;
  SlamSystem& operator=(const SlamSystem&) = delete;

  FrameOutcome process_frame(const Frame& frame);
  /// Waits for and merges every outstanding bundle adjustment.
  void finish();

  const SlamConfig& config() const { return cfg_; }
  std::vector<MapSnapshot> maps() const;  // ascending id
  MapSnapshot map(int id) const;
  const std::map<int, std::vector<TrajectoryEntry>>& trajectories() const { return trajectories_; }
  const std::vector<GrowthEntry>& growth() const { return growth_; }
  int ba_runs() const { return ba_runs_; }

 private:
  struct BaJob {
    int due_frame = 0;
    std::future<BaProblem> result;
  };

  void initialize_static(const Frame& frame, FrameOutcome& out);
  int seed_object_map(const Frame& frame, const std::vector<int>& segment_ids, FrameOutcome& out);
  // A flagged group touching a segment already owned by an object map is the
  // unseen part of that object, not a new one.
  int adjacent_object_map(const Frame& frame, const std::vector<int>& group, const FrameOutcome& out) const;
  void absorb_group(const Frame& frame, const std::vector<int>& group, int map_id, FrameOutcome& out);
  void merge_due(int frame_index, bool all);
  void schedule_ba(int map_id, int frame_index);
  RansacConfig ransac_for(int frame_index, int map_id) const;

  SlamConfig cfg_;
  std::map<int, MapSnapshot> maps_;
  std::map<int, std::vector<TrajectoryEntry>> trajectories_;
  std::vector<GrowthEntry> growth_;
  std::map<int, BaJob> ba_jobs_;
  std::set<int> ba_dirty_;
  IdAllocator landmark_ids_;
  int next_map_id_ = 0;
  int ba_runs_ = 0;
};

}  // namespace jslam
