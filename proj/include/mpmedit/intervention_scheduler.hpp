#pragma once

// Timed and event-driven edits applied to a running simulation.
// Schedule text grammar: docs/schedule_grammar.md.

#include "mpmedit/mpm_engine.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mpmedit {

enum class Property { YoungModulus, PoissonRatio, Density, MaterialModel, VelocityImpulse, Gravity, Wind };
enum class TriggerKind { AtTime, GroundContact, HeightBelow, SpeedAbove };
enum class RampScale { Linear, Log };

std::string property_name(Property p);
std::string trigger_name(TriggerKind k);

struct Selector {
  bool scene = false;           // gravity / wind on the whole scene
  int object = -1;
  std::optional<std::int32_t> part;
  bool interior_only = false;
};

struct Trigger {
  TriggerKind kind = TriggerKind::AtTime;
  double value = 0.0;   // time, height or speed
  int watch_object = -1;  // object whose aggregates drive an event; -1 = any
};

struct Intervention {
  Selector target;
  Property property = Property::YoungModulus;
  double scalar = 0.0;
  Vec3 vector = Vec3::Zero();
  MaterialClass material = MaterialClass::Elastic;
  Trigger trigger;
  double ramp = 0.0;
  bool one_shot = true;
  int line = 0;  // 1-based source line
};

struct Clamp {
  double min = 0.0;
  double max = 0.0;
};

struct InstructionSchedule {
  std::vector<Intervention> items;
  Clamp young{1e2, 1e12};
  Clamp poisson{-0.45, 0.499};
  Clamp density{1.0, 2e4};
  double max_log_rate = 2.0;  // decades per second for E and rho

  const Clamp& clamp_for(Property p) const;
};

// What the compiler needs to resolve selectors.
struct SceneInfo {
  std::vector<std::string> object_names;
  std::vector<std::set<std::int32_t>> part_labels;
};

SceneInfo scene_info(const SimulationState& state);

InstructionSchedule compile_schedule(std::string_view text, const SceneInfo& scene);

/// Interpolates from v_from to v_to over `duration` seconds. Log scale
/// interpolates exponents and needs positive endpoints.
double ramp_value(double v_from, double v_to, double t_since_trigger, double duration, RampScale scale);

struct EventFlags {
  std::vector<ObjectAggregate> objects;
};

struct EditRecord {
  double t = 0.0;
  std::uint64_t substep = 0;
  std::string kind;  // activate, update, complete, summary
  int intervention = -1;
  int line = 0;
  std::string property;
  std::size_t particles = 0;
  bool clamped = false;
  bool rate_limited = false;
  double elapsed = 0.0;          // time since the previous application
  double max_dlog10_young = 0.0;
  double max_dlog10_density = 0.0;
  std::string note;

  std::string to_json() const;
};

// Holds the per-intervention runtime (activation time, starting values).
class ScheduleRunner {
 public:
  explicit ScheduleRunner(InstructionSchedule schedule);

  /// Applies every active intervention at time t. Returns the edits made;
  /// an empty result means the state was not touched.
  std::vector<EditRecord> apply(SimulationState& state, double t, const EventFlags& events);

  const InstructionSchedule& schedule() const { return schedule_; }

 private:
  struct Runtime {
    bool active = false;
    bool finished = false;
    bool predicate_was_true = false;
    int fire_count = 0;
    double t0 = 0.0;
    std::vector<std::size_t> particles;
    std::vector<double> from;  // per particle for scalar properties
    Vec3 vec_from = Vec3::Zero();
  };

  bool predicate(const Intervention& iv, const EventFlags& events) const;
  void activate(std::size_t k, SimulationState& state, double t, std::vector<EditRecord>& log);

  InstructionSchedule schedule_;
  std::vector<Runtime> runtime_;
  std::optional<double> last_t_;
};

// Single-call form for callers that hold the runner themselves.
std::vector<EditRecord> apply_interventions(SimulationState& state, ScheduleRunner& runner, double t,
                                            const EventFlags& events);

}  // namespace mpmedit
