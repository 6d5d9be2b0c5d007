#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "jslam/sim/simulator.hpp"
#include "jslam/slam/slam.hpp"

namespace jslam {

struct TrajectoryError {
  double ate_rmse = 0.0;  // meters
  double rot_rmse = 0.0;  // degrees
  std::vector<double> translation_errors;  // per pose, meters
  std::vector<double> rotation_errors;     // per pose, degrees
  Pose alignment;  // applied to the estimate: aligned_i = alignment * est_i
};

/// Rigid transform G minimizing the squared distances between G * est_i and
/// truth_i. Each pose contributes its origin and the tips of its three unit
/// axes, so orientation pins the gauge even when the positions are collinear.
Pose align_trajectories(std::span<const Pose> est, std::span<const Pose> truth);

/// Translation and rotation RMSE after gauge alignment. Throws LengthMismatch
/// unless both lists have the same length of at least 2.
TrajectoryError trajectory_error(std::span<const Pose> est, std::span<const Pose> truth);

struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const { return tp + fp + fn + tn; }
  // Vacuous cases (nothing predicted, nothing to find) count as perfect.
  double precision() const { return tp + fp > 0 ? double(tp) / double(tp + fp) : 1.0; }
  double recall() const { return tp + fn > 0 ? double(tp) / double(tp + fn) : 1.0; }
  double f1() const;
};

struct MapClassification {
  int map_id = 0;
  int origin = 0;            // ground-truth origin label the map stands for
  int frames_evaluated = 0;  // frames where the map registered
  ConfusionCounts counts;
};

struct ClassificationReport {
  std::vector<MapClassification> maps;  // ascending map id

  const MapClassification* find(int map_id) const;
};

/// Per map, over every frame where that map registered: a measurement is a
/// positive prediction when assigned to the map and a positive truth when its
/// time-dependent origin equals the map's origin. `map_origin` names the
/// origin of each map to report.
ClassificationReport classification_report(std::span<const FrameOutcome> outcomes, const GroundTruth& truth,
                                           const std::map<int, int>& map_origin);

/// Static map 0 stands for origin 0. An object map stands for the origin
/// held by most measurements assigned to it in frames where it registered.
std::map<int, int> infer_map_origins(std::span<const FrameOutcome> outcomes, const GroundTruth& truth);

/// Fraction of landmarks whose observations mostly carry the map's dominant
/// ground-truth origin. An object observed before it first moved is static
/// by origin. Throws EmptyMap.
double map_purity(const WorldMap& map, const GroundTruth& truth);

struct MapMetrics {
  int map_id = 0;
  int origin = 0;
  int keyframes = 0;
  int landmarks = 0;
  std::optional<TrajectoryError> trajectory;  // absent with fewer than 2 poses
  MapClassification classification;
  std::optional<double> purity;  // absent for an empty map
  int frames_visible = 0;     // frames since creation where the origin was visible
  int frames_registered = 0;  // of those, frames where the map registered

  double registration_rate() const {
    return frames_visible > 0 ? double(frames_registered) / frames_visible : 1.0;
  }
};

struct RunMetrics {
  std::vector<MapMetrics> maps;  // ascending map id
  int frames = 0;
  int frame_errors = 0;

  const MapMetrics* find(int map_id) const;
};

/// An origin counts as visible in a frame with at least this many of its measurements.
inline constexpr int kVisibilityThreshold = 10;

RunMetrics evaluate_run(std::span<const WorldMap> maps,
                        const std::map<int, std::vector<TrajectoryEntry>>& trajectories,
                        std::span<const FrameOutcome> outcomes, const GroundTruth& truth, int frame_errors = 0);

}  // namespace jslam
