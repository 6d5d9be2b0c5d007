#include "jslam/sim/run.hpp"

#include <chrono>

#include "jslam/common/error.hpp"

namespace jslam {

const WorldMap* RunArtifacts::map(int id) const {
  for (const auto& m : maps)
    if (m->id == id) return m.get();
  return nullptr;
}

RunArtifacts run_sequence(const Scenario& scenario, const SlamConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  scenario.validate();
  RunArtifacts out;
  out.scenario = scenario;
  out.config = config;
  const World world = build_world(scenario);
  out.truth.object_label = world.object_label;
  SlamSystem slam(config);
  for (int t = 0; t < scenario.frame_count; ++t) {
    SimulatedFrame sf = synthesize_frame(scenario, world, t);
    out.truth.frames.push_back(std::move(sf.truth));
    try {
      FrameOutcome o = slam.process_frame(sf.frame);
      for (const auto& e : o.errors) out.errors.push_back({t, e});
      out.outcomes.push_back(std::move(o));
    } catch (const Error& e) {
      out.errors.push_back({t, e.what()});
      FrameOutcome o;
      o.frame_index = t;
      o.timestamp = sf.frame.timestamp;
      o.errors.push_back(e.what());
      out.outcomes.push_back(std::move(o));
    }
  }
  slam.finish();
  out.maps = slam.maps();
  out.trajectories = slam.trajectories();
  out.growth = slam.growth();
  out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace jslam
