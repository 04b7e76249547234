#pragma once

// Explicit MLS-MPM (quadratic B-splines, APIC transfer) over particle sets
// built from filled material fields.

#include "mpmedit/constitutive.hpp"
#include "mpmedit/material_field.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mpmedit {

enum class BoundaryKind { Sticky, Slip, Separate };

std::string boundary_kind_name(BoundaryKind b);
BoundaryKind parse_boundary_kind(const std::string& name);

struct SimConfig {
  double h_grid = 0.02;
  Vec3 domain_min = Vec3::Zero();
  Vec3 domain_max = Vec3::Ones();
  double cfl = 0.3;
  int frames = 24;
  double fps = 24.0;
  // Walls in order x-, x+, y-, y+, z-, z+.
  std::array<BoundaryKind, 6> walls{BoundaryKind::Separate, BoundaryKind::Separate,
                                    BoundaryKind::Separate, BoundaryKind::Separate,
                                    BoundaryKind::Separate, BoundaryKind::Separate};
  BoundaryKind ground = BoundaryKind::Sticky;
  // Ground plane height; unset means the top of the lower boundary margin.
  std::optional<double> ground_height;
  double damping = 0.0;  // 1/s, applied to grid velocities
  Vec3 gravity{0.0, -9.8, 0.0};
  Vec3 wind = Vec3::Zero();
  double max_dt = 0.0;  // 0 caps at one frame
  std::uint64_t seed = 42;
  PlasticityParams plasticity{};

  void validate() const;
  double ground_y() const;
  static constexpr int kMargin = 3;
};

struct ObjectSpec {
  std::string name;
  MaterialField field;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  bool kinematic = false;  // moves at `velocity`, imposes it on nearby grid nodes
};

struct ObjectInfo {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool kinematic = false;
  std::optional<Vec3> gravity;  // overrides the scene value when set
  std::optional<Vec3> wind;

  std::size_t size() const noexcept { return end - begin; }
};

struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double h = 0.0;
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();  // node counts

  std::size_t node_count() const {
    return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  }
  std::size_t flat(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims.y() + y) * dims.x() + x;
  }
};

struct SimulationState {
  // particles
  std::vector<Vec3> x;
  std::vector<Vec3> v;
  std::vector<Mat3> F;
  std::vector<Mat3> C;
  std::vector<PlasticState> plastic;
  std::vector<double> mass;
  std::vector<double> volume;
  std::vector<std::int32_t> object_id;
  std::vector<std::int32_t> part_label;  // -1 when the source field had none
  std::vector<std::uint8_t> interior;
  std::vector<MaterialClass> cls;
  std::vector<double> young;
  std::vector<double> poisson;
  std::vector<double> density;

  std::vector<ObjectInfo> objects;
  GridSpec grid;
  Vec3 gravity = Vec3::Zero();
  Vec3 wind = Vec3::Zero();
  double t = 0.0;
  std::uint64_t substeps = 0;
  PlasticityParams plasticity{};

  std::size_t size() const noexcept { return x.size(); }
  double total_mass() const;
  Vec3 total_momentum() const;
  Vec3 center_of_mass(std::size_t object) const;
  MaterialModel model_of(std::size_t p) const { return {cls[p], plasticity}; }
};

SimulationState build_state(const std::vector<ObjectSpec>& objects, const SimConfig& cfg);

double stable_dt(const SimulationState& state, const SimConfig& cfg);

/// One substep. Throws ParticleEscape if a particle leaves the region whose
/// interpolation stencil fits inside the grid, NumericalError on NaN/Inf.
void step(SimulationState& state, const SimConfig& cfg, double dt);

// Per-object aggregates for event triggers.
struct ObjectAggregate {
  double min_height = 0.0;
  double max_speed = 0.0;
  bool ground_contact = false;
  Vec3 centroid = Vec3::Zero();
  Vec3 aabb_min = Vec3::Zero();
  Vec3 aabb_max = Vec3::Zero();
};

std::vector<ObjectAggregate> object_aggregates(const SimulationState& state, const SimConfig& cfg);

}  // namespace mpmedit
