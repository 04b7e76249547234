#pragma once

// JSON scene files: simulation settings, objects (field files or primitive
// shells that get filled), a schedule and an optional camera.

#include "mpmedit/intervention_scheduler.hpp"
#include "mpmedit/mpm_engine.hpp"
#include "mpmedit/trajectory_export.hpp"
#include "mpmedit/volumetric_fill.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mpmedit {

struct SceneOverrides {
  std::optional<int> frames;
  std::optional<double> fps;
  std::optional<double> h_grid;
  std::optional<double> cfl;
  std::optional<double> fill_spacing;
  std::optional<std::uint64_t> seed;
};

struct Scene {
  std::string name;
  SimConfig sim;
  FillConfig fill;
  std::vector<ObjectSpec> objects;
  std::string schedule_text;
  CameraSpec camera;
  // Hash of the scene description and every input it references.
  std::string scene_hash;
  // Hash of the effective settings after overrides.
  std::string config_hash;
};

Scene load_scene(const std::filesystem::path& path, const SceneOverrides& overrides = {});
Scene parse_scene(const std::string& json_text, const std::filesystem::path& base_dir,
                  const SceneOverrides& overrides = {});

// Surface field for a primitive shape, centred at the origin.
MaterialField primitive_surface(const std::string& kind, const Vec3& size, double surface_spacing,
                                MaterialClass cls, double young, double poisson, double density,
                                double jitter = 0.0, std::uint64_t seed = 0);

std::string sim_config_json(const SimConfig& cfg);

}  // namespace mpmedit
