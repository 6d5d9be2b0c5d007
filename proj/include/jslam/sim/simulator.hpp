#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jslam/scene/types.hpp"
#include "jslam/sim/scenario.hpp"

namespace jslam {

// Procedurally generated world features, fixed for a scenario and seed.
struct WorldFeature {
  int id = 0;          // world feature id
  int entity = 0;      // index into Scenario::entities
  int patch = -1;      // index into World::patches, -1 for cluster points
  int cluster = -1;    // cluster index within the entity, -1 for patch points
  Vec3 local = Vec3::Zero();  // entity coordinates
  Descriptor descriptor;
};

struct WorldPatch {
  int id = 0;  // world feature id of the plane (after all point ids)
  int entity = 0;
  PatchSpec spec;
  Descriptor descriptor;  // normalized mean of its point descriptors
};

struct World {
  std::vector<WorldFeature> features;
  std::vector<WorldPatch> patches;
  std::vector<int> object_label;        // per entity: 0 for static, k >= 1 for the k-th object
  std::vector<int> first_motion_frame;  // per entity; frame_count when it never moves
};

World build_world(const Scenario& sc);

struct MeasurementTruth {
  int measurement_id = 0;
  int entity = 0;
  int origin = 0;      // motion pattern: 0 static, k the k-th object once it has moved
  int feature_id = 0;  // world feature (or world plane) id
};

struct FrameTruth {
  int frame_index = 0;
  Pose camera;                    // world-from-camera
  std::vector<Pose> entity_poses; // world-from-entity, per entity
  std::vector<MeasurementTruth> measurements;  // ascending measurement id
  std::map<int, int> segment_origin;           // dominant origin per segment id

  const MeasurementTruth* find(int measurement_id) const;
  int origin_of(int measurement_id) const;
};

// Labels of a whole run. `object_label` is per entity (0 static, k the k-th
// object) and, unlike MeasurementTruth::origin, does not depend on time.
struct GroundTruth {
  std::vector<int> object_label;
  std::vector<FrameTruth> frames;  // ascending frame index

  const FrameTruth* frame(int frame_index) const;
  /// Object label of the entity that produced the measurement, -1 if unknown.
  int label_of(int frame_index, int measurement_id) const;
  /// Camera pose in the frame of `label` (the world for 0) at a frame.
  std::optional<Pose> camera_in(int label, int frame_index) const;
};

struct SimulatedFrame {
  Frame frame;
  FrameTruth truth;
};

/// Renders frame `t`: visibility (front of camera, inside the image, facing
/// patches, not hidden behind a patch), noise, segmentation with corruption,
/// and the ground-truth labels. Deterministic in (scenario seed, t).
SimulatedFrame synthesize_frame(const Scenario& sc, const World& world, int t);
SimulatedFrame synthesize_frame(const Scenario& sc, int t);

}  // namespace jslam
