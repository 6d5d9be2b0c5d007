#pragma once

#include <span>
#include <vector>

#include "jslam/scene/types.hpp"

namespace jslam {

enum class KindFilter { All, Points, Planes };

/// Descriptor matching with Lowe's ratio test and greedy one-to-one
/// assignment (closest pairs first). Point measurements (2D or 3D) match
/// point landmarks, planes match planes. A query with a single compatible
/// target has no second-best and passes the ratio test.
CorrespondenceList match_features(std::span<const Measurement* const> queries,
                                  std::span<const Landmark* const> targets, KindFilter filter,
                                  double ratio);

CorrespondenceList match_features(std::span<const Measurement> queries,
                                  std::span<const Landmark* const> targets, KindFilter filter,
                                  double ratio);

/// Distance from each query to its nearest compatible target; +inf when none.
std::vector<double> nearest_descriptor_distances(std::span<const Measurement* const> queries,
                                                 std::span<const Landmark* const> targets);

/// Dense descriptor matrix (32 x n), one column per item.
template <typename Range, typename Get>
Eigen::MatrixXd descriptor_matrix(const Range& items, Get&& get) {
  Eigen::MatrixXd M(kDescriptorLength, static_cast<Eigen::Index>(std::size(items)));
  Eigen::Index i = 0;
  for (const auto& item : items) M.col(i++) = get(item).values();
  return M;
}

}  // namespace jslam
