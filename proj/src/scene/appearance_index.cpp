#include "jslam/scene/appearance_index.hpp"

#include <algorithm>
#include <numeric>

#include "jslam/common/error.hpp"

namespace jslam {

SegmentIndex build_appearance_index(const WorldMap& map) {
  if (map.segments.empty()) throw EmptyMap("map " + std::to_string(map.id) + " has no segments");
  SegmentIndex index;
  index.entries.reserve(map.segments.size());
  for (const MapSegment& s : map.segments) {
    DescriptorVector sum = DescriptorVector::Zero();
    for (int id : s.landmark_ids)
      if (const Landmark* l = map.find_landmark(id)) sum += l->descriptor.values();
    index.entries.push_back({s.id, Descriptor(sum)});
  }
  std::sort(index.entries.begin(), index.entries.end(),
            [](const auto& a, const auto& b) { return a.segment_id < b.segment_id; });
  return index;
}

std::vector<int> query_appearance_index(const SegmentIndex& index, const Segment& seg, const Frame& frame,
                                        int k) {
  DescriptorVector sum = DescriptorVector::Zero();
  for (int id : seg.member_ids)
    if (const Measurement* m = frame.find(id)) sum += m->descriptor.values();
  const Descriptor query(sum);

  std::vector<std::pair<double, int>> scored;
  scored.reserve(index.entries.size());
  for (const auto& e : index.entries) scored.emplace_back(e.aggregate.values().dot(query.values()), e.segment_id);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace jslam
