#pragma once

// Frame loop tying the engine, the schedule and trajectory output together.

#include "mpmedit/intervention_scheduler.hpp"
#include "mpmedit/mpm_engine.hpp"
#include "mpmedit/trajectory_export.hpp"

#include <functional>

namespace mpmedit {

using FrameSink = std::function<void(TrajectoryFrame&&)>;

struct SimulationSummary {
  std::size_t frames = 0;
  std::uint64_t substeps = 0;
  std::vector<std::string> edit_log;  // JSON lines
  double min_dt = 0.0;
  double max_dt = 0.0;
};

TrajectoryFrame capture_frame(const SimulationState& state, const SimConfig& cfg, std::uint64_t index);

/// Runs cfg.frames frames (frame 0 is the initial state), applying the
/// schedule before every substep and handing each frame to `sink`.
SimulationSummary simulate(SimulationState& state, const InstructionSchedule& schedule, const SimConfig& cfg,
                           const FrameSink& sink);

Trajectory simulate(SimulationState& state, const InstructionSchedule& schedule, const SimConfig& cfg);

/// Same loop with frames written by a consumer thread through a bounded
/// queue of `queue_capacity` frames.
Manifest simulate_to_directory(SimulationState& state, const InstructionSchedule& schedule, const SimConfig& cfg,
                               const std::filesystem::path& dir, const ExportOptions& opts,
                               const std::string& scene_hash, const std::string& config_hash,
                               std::size_t queue_capacity = 4);

}  // namespace mpmedit
