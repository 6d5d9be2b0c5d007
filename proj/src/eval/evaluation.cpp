#include "jslam/eval/evaluation.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "jslam/common/error.hpp"

namespace jslam {
namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

// Most frequent key; ties go to the smaller key.
int majority(const std::map<int, long>& votes, int fallback) {
  int best = fallback;
  long best_count = 0;
  for (const auto& [key, count] : votes)
    if (count > best_count) {
      best = key;
      best_count = count;
    }
  return best;
}

bool registered(const FrameOutcome& o, int map_id) {
  auto it = o.results.find(map_id);
  return it != o.results.end() && it->second.ok();
}

}  // namespace

Pose align_trajectories(std::span<const Pose> est, std::span<const Pose> truth) {
  if (est.size() != truth.size() || est.empty()) throw LengthMismatch("trajectories differ in length or are empty");
  const Eigen::Index n = static_cast<Eigen::Index>(est.size());
  Eigen::Matrix3Xd src(3, 4 * n), dst(3, 4 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Mat3 Re = est[i].rotation_matrix(), Rt = truth[i].rotation_matrix();
    src.col(4 * i) = est[i].translation();
    dst.col(4 * i) = truth[i].translation();
    for (int a = 0; a < 3; ++a) {
      src.col(4 * i + 1 + a) = est[i].translation() + Re.col(a);
      dst.col(4 * i + 1 + a) = truth[i].translation() + Rt.col(a);
    }
  }
  return Pose::from_matrix(Eigen::umeyama(src, dst, false));
}

TrajectoryError trajectory_error(std::span<const Pose> est, std::span<const Pose> truth) {
  if (est.size() != truth.size()) throw LengthMismatch("estimate has " + std::to_string(est.size()) +
                                                       " poses, truth " + std::to_string(truth.size()));
  if (est.size() < 2) throw LengthMismatch("at least two poses are needed");
  TrajectoryError out;
  out.alignment = align_trajectories(est, truth);
  double st = 0.0, sr = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    const PoseDelta d = pose_difference(out.alignment * est[i], truth[i]);
    out.translation_errors.push_back(d.translation);
    out.rotation_errors.push_back(d.angle_rad * kRadToDeg);
    st += d.translation * d.translation;
    sr += out.rotation_errors.back() * out.rotation_errors.back();
  }
  out.ate_rmse = std::sqrt(st / est.size());
  out.rot_rmse = std::sqrt(sr / est.size());
  return out;
}

double ConfusionCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

const MapClassification* ClassificationReport::find(int map_id) const {
  for (const auto& m : maps)
    if (m.map_id == map_id) return &m;
  return nullptr;
}

ClassificationReport classification_report(std::span<const FrameOutcome> outcomes, const GroundTruth& truth,
                                           const std::map<int, int>& map_origin) {
  ClassificationReport report;
  for (const auto& [map_id, origin] : map_origin) {
    MapClassification mc;
    mc.map_id = map_id;
    mc.origin = origin;
    for (const auto& o : outcomes) {
      if (!registered(o, map_id)) continue;
      const FrameTruth* ft = truth.frame(o.frame_index);
      if (!ft) continue;
      ++mc.frames_evaluated;
      for (const auto& m : ft->measurements) {
        const bool predicted = o.map_of(m.measurement_id) == map_id;
        const bool actual = m.origin == origin;
        if (predicted && actual) ++mc.counts.tp;
        else if (predicted) ++mc.counts.fp;
        else if (actual) ++mc.counts.fn;
        else ++mc.counts.tn;
      }
    }
    report.maps.push_back(mc);
  }
  return report;
}

std::map<int, int> infer_map_origins(std::span<const FrameOutcome> outcomes, const GroundTruth& truth) {
  std::map<int, std::map<int, long>> votes;
  for (const auto& o : outcomes)
    for (const auto& [map_id, cell] : o.partition) {
      votes[map_id];
      if (map_id == 0 || !registered(o, map_id)) continue;
      for (int id : cell) {
        const FrameTruth* ft = truth.frame(o.frame_index);
        const int origin = ft ? ft->origin_of(id) : -1;
        if (origin >= 0) ++votes[map_id][origin];
      }
    }
  std::map<int, int> out{{0, 0}};
  for (const auto& [map_id, v] : votes)
    if (map_id != 0) out[map_id] = majority(v, 0);
  return out;
}

double map_purity(const WorldMap& map, const GroundTruth& truth) {
  if (map.landmarks.empty()) throw EmptyMap("map " + std::to_string(map.id) + " has no landmarks");
  std::vector<int> labels;
  std::map<int, long> landmark_votes;
  for (const auto& l : map.landmarks) {
    std::map<int, long> votes;
    for (const auto& ob : l.observations) {
      if (ob.keyframe < 0 || ob.keyframe >= static_cast<int>(map.keyframes.size())) continue;
      const FrameTruth* ft = truth.frame(map.keyframes[ob.keyframe].frame_index);
      ++votes[ft ? ft->origin_of(ob.measurement_id) : -1];
    }
    labels.push_back(majority(votes, -1));
    ++landmark_votes[labels.back()];
  }
  const int dominant = majority(landmark_votes, -1);
  long pure = 0;
  for (int l : labels) pure += l == dominant;
  return double(pure) / double(labels.size());
}

const MapMetrics* RunMetrics::find(int map_id) const {
  for (const auto& m : maps)
    if (m.map_id == map_id) return &m;
  return nullptr;
}

RunMetrics evaluate_run(std::span<const WorldMap> maps,
                        const std::map<int, std::vector<TrajectoryEntry>>& trajectories,
                        std::span<const FrameOutcome> outcomes, const GroundTruth& truth, int frame_errors) {
  RunMetrics out;
  out.frames = static_cast<int>(outcomes.size());
  out.frame_errors = frame_errors;
  const std::map<int, int> origins = infer_map_origins(outcomes, truth);
  const ClassificationReport report = classification_report(outcomes, truth, origins);

  for (const WorldMap& map : maps) {
    MapMetrics mm;
    mm.map_id = map.id;
    auto oit = origins.find(map.id);
    mm.origin = oit != origins.end() ? oit->second : 0;
    mm.keyframes = static_cast<int>(map.keyframes.size());
    mm.landmarks = static_cast<int>(map.landmarks.size());
    if (const MapClassification* c = report.find(map.id)) mm.classification = *c;
    else mm.classification.map_id = map.id, mm.classification.origin = mm.origin;
    if (!map.landmarks.empty()) mm.purity = map_purity(map, truth);

    auto tit = trajectories.find(map.id);
    if (tit != trajectories.end()) {
      std::vector<Pose> est, gt;
      for (const auto& e : tit->second)
        if (auto p = truth.camera_in(mm.origin, e.frame_index)) {
          est.push_back(e.pose);
          gt.push_back(*p);
        }
      if (est.size() >= 2) mm.trajectory = trajectory_error(est, gt);
    }

    bool created = false;
    for (const auto& o : outcomes) {
      created = created || o.results.count(map.id) > 0;
      if (!created) continue;
      const FrameTruth* ft = truth.frame(o.frame_index);
      if (!ft) continue;
      int seen = 0;
      for (const auto& m : ft->measurements) seen += truth.label_of(o.frame_index, m.measurement_id) == mm.origin;
      if (seen < kVisibilityThreshold) continue;
      ++mm.frames_visible;
      mm.frames_registered += registered(o, map.id);
    }
    out.maps.push_back(std::move(mm));
  }
  return out;
}

}  // namespace jslam
