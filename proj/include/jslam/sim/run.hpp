#pragma once

#include <map>
#include <string>
#include <vector>

#include "jslam/sim/scenario.hpp"
#include "jslam/sim/simulator.hpp"
#include "jslam/slam/slam.hpp"

namespace jslam {

struct FrameError {
  int frame_index = 0;
  std::string message;
};

struct RunArtifacts {
  Scenario scenario;
  SlamConfig config;
  std::vector<FrameOutcome> outcomes;
  GroundTruth truth;
  std::vector<MapSnapshot> maps;  // after finish(), ascending id
  std::map<int, std::vector<TrajectoryEntry>> trajectories;
  std::vector<GrowthEntry> growth;
  std::vector<FrameError> errors;
  double runtime_seconds = 0.0;  // wall clock, never written to deterministic outputs

  const WorldMap* map(int id) const;
};

/// Streams every frame of the scenario through a fresh SlamSystem. Errors
/// thrown while processing a frame are recorded and the run continues.
RunArtifacts run_sequence(const Scenario& scenario, const SlamConfig& config);

}  // namespace jslam
