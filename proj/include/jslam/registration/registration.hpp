#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jslam/geometry/correspondence.hpp"
#include "jslam/scene/appearance_index.hpp"
#include "jslam/scene/types.hpp"

namespace jslam {

struct RansacConfig {
  int min_matches = 10;
  double success_inlier_ratio = 0.4;
  int max_iterations = 500;
  double confidence = 0.99;
  InlierThresholds thresholds;
  std::uint64_t rng_seed = 0;

  double match_ratio = 0.8;         // Lowe ratio for descriptor matching
  int segment_min_matches = 6;      // floor of the relaxed per-segment gate
  int appearance_top_k = 3;
  double prediction_gate = 3.0;     // multiple of the inlier threshold

  /// max(segment_min_matches, min_matches / 2)
  int relaxed_min_matches() const;
  /// Throws ValidationError on non-positive thresholds or a ratio outside (0, 1].
  void validate() const;
};

enum class RegistrationStatus { Success, Failure };
enum class FailureReason { None, TooFewMatches, LowInlierRatio, NoValidHypothesis, NoCandidateVerified, TooFewInliers };
enum class RegistrationSource { FrameBased, SegmentBased, Initialization };

const char* to_string(FailureReason r);

/// Derives an independent RNG seed from a base seed and a stream index.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
const char* to_string(RegistrationSource s);

struct RegistrationResult {
  RegistrationStatus status = RegistrationStatus::Failure;
  FailureReason reason = FailureReason::NoValidHypothesis;
  RegistrationSource source = RegistrationSource::FrameBased;
  std::optional<Pose> pose;               // frame-in-map; set only on Success
  std::vector<int> inlier_ids;            // ascending measurement ids
  std::vector<int> matched_segment_ids;   // ascending; segment-based only
  std::vector<int> matched_ids;           // every descriptor-matched measurement, ascending
  CorrespondenceList inliers;             // inlier pairs, ascending measurement id
  int match_count = 0;

  bool ok() const { return status == RegistrationStatus::Success; }
  bool is_inlier(int measurement_id) const;
  double inlier_ratio() const { return match_count > 0 ? double(inlier_ids.size()) / match_count : 0.0; }

  static RegistrationResult failure(FailureReason reason, RegistrationSource source, int match_count = 0);
};

/// RANSAC over minimal point/plane triples, refinement of the best hypothesis
/// on its inliers, and one inlier recount under the refined pose. Success
/// requires at least `min_matches` pairs and a final inlier ratio of at least
/// `success_inlier_ratio`. Deterministic for a fixed `rng_seed`.
RegistrationResult ransac_pose(std::span<const Correspondence> corrs, const CameraIntrinsics& K,
                               const RansacConfig& cfg, int min_matches);
inline RegistrationResult ransac_pose(std::span<const Correspondence> corrs, const CameraIntrinsics& K,
                                      const RansacConfig& cfg) {
  return ransac_pose(corrs, K, cfg, cfg.min_matches);
}

/// Frame-based registration against the landmarks seen by the last `window`
/// keyframes of the map.
RegistrationResult register_frame(const Frame& frame, const WorldMap& map, int window, const RansacConfig& cfg);

/// Segment-based registration: appearance retrieval, RANSAC against each of
/// the top-k map segments, then prediction-based refinement on the first
/// verified candidate.
RegistrationResult register_segment(const Segment& seg, const Frame& frame, const WorldMap& map,
                                    const SegmentIndex& index, const RansacConfig& cfg);
RegistrationResult register_segment(const Segment& seg, const Frame& frame, const WorldMap& map,
                                    const RansacConfig& cfg);

/// Gated correspondence search around `predicted`, refinement, and an inlier
/// set over every frame measurement (including ones outside any segment).
/// Fewer than relaxed_min_matches() inliers is a TooFewInliers failure.
RegistrationResult refine_with_prediction(const Frame& frame, const WorldMap& map, const Pose& predicted,
                                          const RansacConfig& cfg);

/// Segment-based results take priority; the one with the most inliers sets
/// the pose. Inliers and matched segments are unioned over the successes
/// whose inliers mostly re-check under that pose; the rest are dropped.
RegistrationResult fuse_results(const RegistrationResult& frame_based,
                                std::span<const RegistrationResult> segment_based, const CameraIntrinsics& K,
                                const RansacConfig& cfg);

}  // namespace jslam
