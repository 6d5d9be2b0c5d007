#pragma once

#include <vector>

#include "jslam/scene/types.hpp"

namespace jslam {

// Candidate retrieval for segment-based registration. Each map segment is
// summarized by the normalized mean of its member landmark descriptors and
// ranked against a frame segment by cosine similarity.
struct SegmentIndex {
  struct Entry {
    int segment_id = -1;
    Descriptor aggregate;
  };
  std::vector<Entry> entries;  // ascending segment id

  std::size_t size() const { return entries.size(); }
};

/// Throws EmptyMap when the map has no segments.
SegmentIndex build_appearance_index(const WorldMap& map);

/// Top-k map segment ids by cosine similarity, descending; ties go to the
/// lower segment id.
std::vector<int> query_appearance_index(const SegmentIndex& index, const Segment& seg, const Frame& frame,
                                        int k);

}  // namespace jslam
