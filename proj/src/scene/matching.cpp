#include "jslam/scene/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace jslam {
namespace {

bool passes_filter(const Measurement& m, KindFilter f) {
  switch (f) {
    case KindFilter::All: return true;
    case KindFilter::Points: return m.is_point();
    case KindFilter::Planes: return m.kind == FeatureKind::Plane;
  }
  return false;
}

struct Group {
  std::vector<const Measurement*> queries;
  std::vector<size_t> query_index;  // position in the caller's query span
  std::vector<const Landmark*> targets;
};

// Unit descriptors: |a - b|^2 = 2 - 2 a.b
Eigen::MatrixXd distance_table(const Group& g) {
  const Eigen::MatrixXd Q = descriptor_matrix(g.queries, [](const Measurement* m) -> const Descriptor& { return m->descriptor; });
  const Eigen::MatrixXd T = descriptor_matrix(g.targets, [](const Landmark* l) -> const Descriptor& { return l->descriptor; });
  Eigen::MatrixXd D = (2.0 - 2.0 * (Q.transpose() * T).array()).max(0.0).sqrt().matrix();
  return D;
}

std::vector<Group> split_groups(std::span<const Measurement* const> queries,
                                std::span<const Landmark* const> targets, KindFilter filter) {
  std::vector<Group> groups(2);  // 0: points, 1: planes
  for (size_t i = 0; i < queries.size(); ++i) {
    const Measurement* m = queries[i];
    if (!passes_filter(*m, filter)) continue;
    Group& g = groups[m->is_point() ? 0 : 1];
    g.queries.push_back(m);
    g.query_index.push_back(i);
  }
  for (const Landmark* l : targets) {
    if (l->kind == FeatureKind::Point3D) groups[0].targets.push_back(l);
    if (l->kind == FeatureKind::Plane) groups[1].targets.push_back(l);
  }
  return groups;
}

}  // namespace

CorrespondenceList match_features(std::span<const Measurement* const> queries,
                                  std::span<const Landmark* const> targets, KindFilter filter,
                                  double ratio) {
  struct Candidate {
    double distance;
    const Measurement* m;
    const Landmark* l;
  };
  std::vector<Candidate> candidates;
  for (const Group& g : split_groups(queries, targets, filter)) {
    if (g.queries.empty() || g.targets.empty()) continue;
    const Eigen::MatrixXd D = distance_table(g);
    for (Eigen::Index q = 0; q < D.rows(); ++q) {
      double best = std::numeric_limits<double>::infinity(), second = best;
      Eigen::Index best_t = -1;
      for (Eigen::Index t = 0; t < D.cols(); ++t) {
        const double d = D(q, t);
        if (d < best) {
          second = best;
          best = d;
          best_t = t;
        } else if (d < second) {
          second = d;
        }
      }
      if (best_t < 0) continue;
      if (std::isfinite(second) && !(best < ratio * second)) continue;
      candidates.push_back({best, g.queries[q], g.targets[best_t]});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.m->id < b.m->id;
  });

  CorrespondenceList out;
  std::unordered_set<int> used_landmarks;
  std::unordered_set<int> used_measurements;
  for (const Candidate& c : candidates) {
    if (used_landmarks.count(c.l->id) || used_measurements.count(c.m->id)) continue;
    if (auto corr = make_correspondence(*c.m, *c.l)) {
      out.push_back(*corr);
      used_landmarks.insert(c.l->id);
      used_measurements.insert(c.m->id);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Correspondence& a, const Correspondence& b) { return a.measurement_id < b.measurement_id; });
  return out;
}

CorrespondenceList match_features(std::span<const Measurement> queries,
                                  std::span<const Landmark* const> targets, KindFilter filter,
                                  double ratio) {
  std::vector<const Measurement*> ptrs;
  ptrs.reserve(queries.size());
  for (const auto& m : queries) ptrs.push_back(&m);
  return match_features(std::span<const Measurement* const>(ptrs), targets, filter, ratio);
}

std::vector<double> nearest_descriptor_distances(std::span<const Measurement* const> queries,
                                                 std::span<const Landmark* const> targets) {
  std::vector<double> out(queries.size(), std::numeric_limits<double>::infinity());
  for (const Group& g : split_groups(queries, targets, KindFilter::All)) {
    if (g.queries.empty() || g.targets.empty()) continue;
    const Eigen::MatrixXd D = distance_table(g);
    for (Eigen::Index q = 0; q < D.rows(); ++q) out[g.query_index[q]] = D.row(q).minCoeff();
  }
  return out;
}

}  // namespace jslam
