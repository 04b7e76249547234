#include "mpmedit/simulation.hpp"

#include "mpmedit/errors.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

namespace mpmedit {

TrajectoryFrame capture_frame(const SimulationState& state, const SimConfig& cfg, std::uint64_t index) {
  TrajectoryFrame f;
  f.index = index;
  f.time = state.t;
  f.positions.resize(state.size() * 3);
  for (std::size_t i = 0; i < state.size(); ++i) {
    for (int a = 0; a < 3; ++a) f.positions[3 * i + static_cast<std::size_t>(a)] = static_cast<float>(state.x[i][a]);
  }
  for (const auto& agg : object_aggregates(state, cfg)) {
    f.objects.push_back({agg.centroid, agg.aabb_min, agg.aabb_max});
  }
  return f;
}

SimulationSummary simulate(SimulationState& state, const InstructionSchedule& schedule, const SimConfig& cfg,
                           const FrameSink& sink) {
  cfg.validate();
  SimulationSummary sum;
  sum.min_dt = std::numeric_limits<double>::infinity();
  ScheduleRunner runner(schedule);
  sink(capture_frame(state, cfg, 0));
  sum.frames = 1;
  const double t_start = state.t;
  for (int k = 1; k < cfg.frames; ++k) {
    const double t_frame = t_start + static_cast<double>(k) / cfg.fps;
    std::uint64_t in_frame = 0;
    while (state.t < t_frame) {
      EventFlags ev{object_aggregates(state, cfg)};
      for (const auto& rec : runner.apply(state, state.t, ev)) sum.edit_log.push_back(rec.to_json());
      double dt = stable_dt(state, cfg);
      const double remaining = t_frame - state.t;
      // Land exactly on the frame time instead of leaving a sliver substep.
      const bool last = dt >= remaining * (1.0 - 1e-9);
      if (last) dt = remaining;
      try {
        step(state, cfg, dt);
      } catch (const Error& e) {
        std::ostringstream os;
        os << e.what() << " (frame " << k << ", substep " << in_frame << ")";
        fail(e.code(), os.str());
      }
      if (last) state.t = t_frame;
      sum.min_dt = std::min(sum.min_dt, dt);
      sum.max_dt = std::max(sum.max_dt, dt);
      ++in_frame;
    }
    sink(capture_frame(state, cfg, static_cast<std::uint64_t>(k)));
    ++sum.frames;
  }
  sum.substeps = state.substeps;
  if (sum.frames == 1) sum.min_dt = 0.0;
  return sum;
}

Trajectory simulate(SimulationState& state, const InstructionSchedule& schedule, const SimConfig& cfg) {
  Trajectory traj;
  traj.fps = cfg.fps;
  traj.object_id = state.object_id;
  const auto sum = simulate(state, schedule, cfg, [&](TrajectoryFrame&& f) { traj.frames.push_back(std::move(f)); });
  traj.edit_log = sum.edit_log;
  return traj;
}

Manifest simulate_to_directory(SimulationState& state, const InstructionSchedule& schedule, const SimConfig& cfg,
                               const std::filesystem::path& dir, const ExportOptions& opts,
                               const std::string& scene_hash, const std::string& config_hash,
                               std::size_t queue_capacity) {
  TrajectoryWriter writer(dir, opts);
  writer.begin(cfg.fps, state.object_id);
  BoundedQueue<TrajectoryFrame> queue(queue_capacity);
  std::exception_ptr consumer_error;
  std::thread consumer([&] {
    try {
      while (auto f = queue.pop()) writer.add(*f);
    } catch (...) {
      consumer_error = std::current_exception();
      queue.close();
    }
  });
  SimulationSummary sum;
  try {
    sum = simulate(state, schedule, cfg, [&](TrajectoryFrame&& f) { queue.push(std::move(f)); });
  } catch (...) {
    queue.close();
    consumer.join();
    throw;
  }
  queue.close();
  consumer.join();
  if (consumer_error) std::rethrow_exception(consumer_error);
  return writer.finish(sum.edit_log, scene_hash, config_hash);
}

}  // namespace mpmedit
