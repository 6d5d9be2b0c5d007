#include "jslam/registration/registration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "jslam/common/error.hpp"
#include "jslam/geometry/pose_estimation.hpp"
#include "jslam/scene/matching.hpp"

namespace jslam {

int RansacConfig::relaxed_min_matches() const { return std::max(segment_min_matches, min_matches / 2); }

void RansacConfig::validate() const {
  if (min_matches < 3) throw ValidationError("min_matches must be at least 3");
  if (!(success_inlier_ratio > 0.0 && success_inlier_ratio <= 1.0))
    throw ValidationError("success_inlier_ratio must lie in (0, 1]");
  if (max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence must lie in (0, 1)");
  if (!(thresholds.sigma_floor > 0.0) || thresholds.depth_noise_coeff < 0.0 || !(thresholds.reproj_px > 0.0) ||
      !(thresholds.plane_angle_deg > 0.0))
    throw ValidationError("inlier thresholds must be positive");
  if (!(match_ratio > 0.0 && match_ratio <= 1.0)) throw ValidationError("match_ratio must lie in (0, 1]");
  if (segment_min_matches < 3 || appearance_top_k < 1 || !(prediction_gate > 0.0))
    throw ValidationError("invalid segment registration parameters");
}

const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::TooFewMatches: return "too_few_matches";
    case FailureReason::LowInlierRatio: return "low_inlier_ratio";
    case FailureReason::NoValidHypothesis: return "no_valid_hypothesis";
    case FailureReason::NoCandidateVerified: return "no_candidate_verified";
    case FailureReason::TooFewInliers: return "too_few_inliers";
  }
  return "?";
}

const char* to_string(RegistrationSource s) {
  switch (s) {
    case RegistrationSource::FrameBased: return "frame_based";
    case RegistrationSource::SegmentBased: return "segment_based";
    case RegistrationSource::Initialization: return "initialization";
  }
  return "?";
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool RegistrationResult::is_inlier(int measurement_id) const {
  return std::binary_search(inlier_ids.begin(), inlier_ids.end(), measurement_id);
}

RegistrationResult RegistrationResult::failure(FailureReason reason, RegistrationSource source, int match_count) {
  RegistrationResult r;
  r.status = RegistrationStatus::Failure;
  r.reason = reason;
  r.source = source;
  r.match_count = match_count;
  return r;
}

namespace {

std::vector<int> inlier_indices(std::span<const Correspondence> corrs, const Pose& T, const CameraIntrinsics& K,
                                const InlierThresholds& th) {
  std::vector<int> out;
  for (size_t i = 0; i < corrs.size(); ++i)
    if (is_inlier(T, corrs[i], K, th)) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> sorted_measurement_ids(std::span<const Correspondence> corrs) {
  std::vector<int> ids;
  ids.reserve(corrs.size());
  for (const auto& c : corrs) ids.push_back(c.measurement_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Fills pose, inliers and status from a final pose over `corrs`.
RegistrationResult finish(std::span<const Correspondence> corrs, const Pose& T, const CameraIntrinsics& K,
                          const RansacConfig& cfg, RegistrationSource source, int min_inliers = 0) {
  RegistrationResult r;
  r.source = source;
  r.match_count = static_cast<int>(corrs.size());
  r.matched_ids = sorted_measurement_ids(corrs);
  for (int i : inlier_indices(corrs, T, K, cfg.thresholds)) r.inliers.push_back(corrs[i]);
  std::sort(r.inliers.begin(), r.inliers.end(),
            [](const Correspondence& a, const Correspondence& b) { return a.measurement_id < b.measurement_id; });
  r.inlier_ids = sorted_measurement_ids(r.inliers);
  if (static_cast<int>(r.inliers.size()) < min_inliers) {
    r.status = RegistrationStatus::Failure;
    r.reason = FailureReason::TooFewInliers;
    r.inliers.clear();
    r.inlier_ids.clear();
  } else if (r.inlier_ratio() >= cfg.success_inlier_ratio) {
    r.status = RegistrationStatus::Success;
    r.reason = FailureReason::None;
    r.pose = T;
  } else {
    r.status = RegistrationStatus::Failure;
    r.reason = FailureReason::LowInlierRatio;
    r.inliers.clear();
    r.inlier_ids.clear();
  }
  return r;
}

}  // namespace

RegistrationResult ransac_pose(std::span<const Correspondence> corrs, const CameraIntrinsics& K,
                               const RansacConfig& cfg, int min_matches) {
  const int n = static_cast<int>(corrs.size());
  auto fail = [&](FailureReason reason) {
    auto r = RegistrationResult::failure(reason, RegistrationSource::FrameBased, n);
    r.matched_ids = sorted_measurement_ids(corrs);
    return r;
  };
  if (n < min_matches) return fail(FailureReason::TooFewMatches);

  std::vector<int> sampleable;
  for (int i = 0; i < n; ++i)
    if (corrs[i].usable_in_minimal_sample()) sampleable.push_back(i);
  if (sampleable.size() < 3) return fail(FailureReason::NoValidHypothesis);

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_int_distribution<size_t> pick(0, sampleable.size() - 1);
  const double log_fail = std::log(1.0 - cfg.confidence);

  std::optional<Pose> best;
  int best_count = 0;
  int cap = cfg.max_iterations;
  std::array<Correspondence, 3> sample;
  for (int it = 0; it < cap; ++it) {
    size_t a = pick(rng), b = pick(rng), c = pick(rng);
    while (b == a) b = pick(rng);
    while (c == a || c == b) c = pick(rng);
    sample = {corrs[sampleable[a]], corrs[sampleable[b]], corrs[sampleable[c]]};
    Pose hyp;
    try {
      hyp = estimate_pose_minimal(sample);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    if (!hyp.translation().allFinite() || !hyp.rotation().coeffs().allFinite()) continue;
    int count = 0;
    for (const auto& corr : corrs) count += is_inlier(hyp, corr, K, cfg.thresholds) ? 1 : 0;
    if (count > best_count) {
      best_count = count;
      best = hyp;
      const double w = double(count) / n;
      const double miss = 1.0 - w * w * w;
      if (miss <= 0.0) {
        cap = std::min(cap, it + 1);
      } else {
        const double needed = std::ceil(log_fail / std::log(miss));
        if (needed < cap) cap = std::max(it + 1, static_cast<int>(needed));
      }
    }
  }
  if (!best || best_count < 3) return fail(FailureReason::NoValidHypothesis);

  Pose T = *best;
  CorrespondenceList support;
  for (int i : inlier_indices(corrs, T, K, cfg.thresholds)) support.push_back(corrs[i]);
  try {
    T = refine_pose_least_squares(support, T, K, cfg.thresholds).pose;
  } catch (const DegenerateConfiguration&) {
    // keep the minimal hypothesis
  }
  return finish(corrs, T, K, cfg, RegistrationSource::FrameBased);
}

RegistrationResult register_frame(const Frame& frame, const WorldMap& map, int window, const RansacConfig& cfg) {
  if (map.keyframes.empty()) throw EmptyMap("map " + std::to_string(map.id) + " has no keyframes");
  const auto targets = map.landmarks_in_last_keyframes(std::max(1, window));
  const auto corrs =
      match_features(std::span<const Measurement>(frame.measurements), targets, KindFilter::All, cfg.match_ratio);
  return ransac_pose(corrs, frame.intrinsics, cfg);
}

RegistrationResult register_segment(const Segment& seg, const Frame& frame, const WorldMap& map,
                                    const RansacConfig& cfg) {
  return register_segment(seg, frame, map, build_appearance_index(map), cfg);
}

RegistrationResult register_segment(const Segment& seg, const Frame& frame, const WorldMap& map,
                                    const SegmentIndex& index, const RansacConfig& cfg) {
  auto fail = RegistrationResult::failure(FailureReason::NoCandidateVerified, RegistrationSource::SegmentBased);
  if (seg.member_ids.empty() || index.size() == 0) return fail;

  std::vector<const Measurement*> queries;
  for (int id : seg.member_ids)
    if (const Measurement* m = frame.find(id)) queries.push_back(m);
  if (static_cast<int>(queries.size()) < cfg.relaxed_min_matches()) return fail;

  const auto candidates = query_appearance_index(index, seg, frame, cfg.appearance_top_k);
  for (size_t ci = 0; ci < candidates.size(); ++ci) {
    const auto ms = std::find_if(map.segments.begin(), map.segments.end(),
                                 [&](const MapSegment& s) { return s.id == candidates[ci]; });
    std::vector<const Landmark*> targets;
    for (int lid : ms->landmark_ids)
      if (const Landmark* l = map.find_landmark(lid)) targets.push_back(l);
    const auto corrs = match_features(queries, targets, KindFilter::All, cfg.match_ratio);

    RansacConfig local = cfg;
    local.rng_seed = mix_seed(cfg.rng_seed, (static_cast<std::uint64_t>(seg.id) << 8) + ci);
    const RegistrationResult hyp = ransac_pose(corrs, frame.intrinsics, local, cfg.relaxed_min_matches());
    if (!hyp.ok()) continue;

    RegistrationResult refined = refine_with_prediction(frame, map, *hyp.pose, cfg);
    if (!refined.ok()) continue;
    refined.matched_segment_ids = {seg.id};
    return refined;
  }
  return fail;
}

RegistrationResult refine_with_prediction(const Frame& frame, const WorldMap& map, const Pose& predicted,
                                          const RansacConfig& cfg) {
  const CameraIntrinsics& K = frame.intrinsics;
  const auto& th = cfg.thresholds;
  const double gate = cfg.prediction_gate;

  std::vector<const Landmark*> points, planes;
  for (const auto& l : map.landmarks) (l.kind == FeatureKind::Plane ? planes : points).push_back(&l);

  // Landmarks expressed in the predicted camera frame, for the pixel gate.
  const Pose map_to_frame = predicted.inverse();
  std::vector<Vec3> points_in_frame;
  points_in_frame.reserve(points.size());
  for (const Landmark* l : points) points_in_frame.push_back(map_to_frame * l->position);

  std::vector<const Measurement*> point_meas, plane_meas;
  for (const auto& m : frame.measurements) (m.is_point() ? point_meas : plane_meas).push_back(&m);

  struct Candidate {
    double distance;
    const Measurement* m;
    const Landmark* l;
  };
  std::vector<Candidate> candidates;

  auto gated_ratio_test = [&](const std::vector<const Measurement*>& ms, const std::vector<const Landmark*>& ls,
                              auto&& passes_gate) {
    if (ms.empty() || ls.empty()) return;
    const Eigen::MatrixXd Q = descriptor_matrix(ms, [](const Measurement* m) -> const Descriptor& { return m->descriptor; });
    const Eigen::MatrixXd L = descriptor_matrix(ls, [](const Landmark* l) -> const Descriptor& { return l->descriptor; });
    const Eigen::MatrixXd D = (2.0 - 2.0 * (Q.transpose() * L).array()).max(0.0).sqrt().matrix();
    for (size_t q = 0; q < ms.size(); ++q) {
      double best = std::numeric_limits<double>::infinity(), second = best;
      int best_l = -1;
      for (size_t t = 0; t < ls.size(); ++t) {
        if (!passes_gate(*ms[q], t)) continue;
        const double d = D(q, t);
        if (d < best) {
          second = best;
          best = d;
          best_l = static_cast<int>(t);
        } else if (d < second) {
          second = d;
        }
      }
      if (best_l < 0) continue;
      if (std::isfinite(second) && !(best < cfg.match_ratio * second)) continue;
      candidates.push_back({best, ms[q], ls[best_l]});
    }
  };

  gated_ratio_test(point_meas, points, [&](const Measurement& m, size_t t) {
    if (m.kind == FeatureKind::Point3D)
      return (predicted * m.position - points[t]->position).norm() < gate * th.sigma_3d(m.position.z());
    const Vec3& p = points_in_frame[t];
    if (p.z() <= 1e-9) return false;
    return (project(K, p).vec() - m.pixel.vec()).norm() < gate * th.reproj_px;
  });
  gated_ratio_test(plane_meas, planes, [&](const Measurement& m, size_t t) {
    const auto c = Correspondence::plane_plane(m.plane, planes[t]->plane);
    return is_inlier(predicted, c, K, th, gate);
  });

  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.m->id < b.m->id;
  });
  CorrespondenceList corrs;
  std::unordered_set<int> used_l, used_m;
  for (const auto& c : candidates) {
    if (used_l.count(c.l->id) || used_m.count(c.m->id)) continue;
    used_l.insert(c.l->id);
    used_m.insert(c.m->id);
    corrs.push_back(*make_correspondence(*c.m, *c.l));
  }
  std::sort(corrs.begin(), corrs.end(),
            [](const Correspondence& a, const Correspondence& b) { return a.measurement_id < b.measurement_id; });

  const int n = static_cast<int>(corrs.size());
  if (n < cfg.relaxed_min_matches())
    return RegistrationResult::failure(FailureReason::TooFewMatches, RegistrationSource::SegmentBased, n);

  Pose T = predicted;
  try {
    T = refine_pose_least_squares(corrs, predicted, K, th).pose;
  } catch (const DegenerateConfiguration&) {
    return RegistrationResult::failure(FailureReason::NoValidHypothesis, RegistrationSource::SegmentBased, n);
  }
  // three pairs always admit an exact pose, so a handful of inliers proves nothing
  return finish(corrs, T, K, cfg, RegistrationSource::SegmentBased, cfg.relaxed_min_matches());
}

RegistrationResult fuse_results(const RegistrationResult& frame_based,
                                std::span<const RegistrationResult> segment_based, const CameraIntrinsics& K,
                                const RansacConfig& cfg) {
  const RegistrationResult* best = nullptr;
  for (const auto& r : segment_based)
    if (r.ok() && (!best || r.inlier_ids.size() > best->inlier_ids.size())) best = &r;
  if (!best) return frame_based;

  RegistrationResult fused = *best;
  fused.source = RegistrationSource::SegmentBased;
  const Pose& T = *best->pose;
  std::map<int, Correspondence> inliers;
  std::set<int> segments, matched;
  auto absorb = [&](const RegistrationResult& r) {
    if (!r.ok()) return;
    // only results that agree with the winning pose contribute
    CorrespondenceList agreeing;
    for (const auto& c : r.inliers)
      if (is_inlier(T, c, K, cfg.thresholds)) agreeing.push_back(c);
    if (agreeing.size() < cfg.success_inlier_ratio * r.inliers.size()) return;
    for (const auto& c : agreeing) inliers.emplace(c.measurement_id, c);
    segments.insert(r.matched_segment_ids.begin(), r.matched_segment_ids.end());
    matched.insert(r.matched_ids.begin(), r.matched_ids.end());
  };
  absorb(*best);  // first, so its pairs win on shared measurements
  for (const auto& r : segment_based)
    if (&r != best) absorb(r);
  absorb(frame_based);

  fused.inliers.clear();
  fused.inlier_ids.clear();
  for (const auto& [id, c] : inliers) {
    fused.inliers.push_back(c);
    fused.inlier_ids.push_back(id);
  }
  fused.matched_segment_ids.assign(segments.begin(), segments.end());
  fused.matched_ids.assign(matched.begin(), matched.end());
  fused.match_count = std::max<int>(fused.match_count, static_cast<int>(fused.matched_ids.size()));
  return fused;
}

}  // namespace jslam
