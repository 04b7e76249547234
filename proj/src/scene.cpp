#include "mpmedit/scene.hpp"

#include "binary_io.hpp"
#include "mpmedit/errors.hpp"
#include "mpmedit/field_io.hpp"
#include "mpmedit/primitives.hpp"
#include "mpmedit/random.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mpmedit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

Vec3 vec3(const ojson& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::ConfigError, what + " must be a 3-element array");
  Vec3 v;
  for (int a = 0; a < 3; ++a) {
    if (!j[static_cast<std::size_t>(a)].is_number()) fail(ErrorCode::ConfigError, what + " must hold numbers");
    v[a] = j[static_cast<std::size_t>(a)].get<double>();
  }
  return v;
}

ojson vec_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

template <class T>
T get_or(const ojson& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::ConfigError, std::string("scene key '") + key + "' has the wrong type");
  }
}

Mat3 euler_deg(const Vec3& deg) {
  const Vec3 r = deg * std::numbers::pi / 180.0;
  return (Eigen::AngleAxisd(r.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(r.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(r.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

SimConfig parse_sim(const ojson& j) {
  SimConfig c;
  if (j.is_null()) return c;
  c.h_grid = get_or(j, "h_grid", c.h_grid);
  if (j.contains("domain_min")) c.domain_min = vec3(j["domain_min"], "sim.domain_min");
  if (j.contains("domain_max")) c.domain_max = vec3(j["domain_max"], "sim.domain_max");
  c.cfl = get_or(j, "cfl", c.cfl);
  c.frames = get_or(j, "frames", c.frames);
  c.fps = get_or(j, "fps", c.fps);
  c.damping = get_or(j, "damping", c.damping);
  c.max_dt = get_or(j, "max_dt", c.max_dt);
  if (j.contains("gravity")) c.gravity = vec3(j["gravity"], "sim.gravity");
  if (j.contains("wind")) c.wind = vec3(j["wind"], "sim.wind");
  if (j.contains("ground")) c.ground = parse_boundary_kind(j["ground"].get<std::string>());
  if (j.contains("ground_height")) c.ground_height = j["ground_height"].get<double>();
  if (j.contains("walls")) {
    const auto& w = j["walls"];
    if (w.is_string()) {
      c.walls.fill(parse_boundary_kind(w.get<std::string>()));
    } else if (w.is_array() && w.size() == 6) {
      for (std::size_t i = 0; i < 6; ++i) c.walls[i] = parse_boundary_kind(w[i].get<std::string>());
    } else {
      fail(ErrorCode::ConfigError, "sim.walls must be a name or a list of six names");
    }
  }
  if (j.contains("plasticity")) {
    const auto& p = j["plasticity"];
    auto& pp = c.plasticity;
    pp.yield_stress = get_or(p, "yield_stress", pp.yield_stress);
    pp.friction_angle_deg = get_or(p, "friction_angle_deg", pp.friction_angle_deg);
    pp.critical_compression = get_or(p, "critical_compression", pp.critical_compression);
    pp.critical_stretch = get_or(p, "critical_stretch", pp.critical_stretch);
    pp.snow_hardening = get_or(p, "snow_hardening", pp.snow_hardening);
    pp.rigid_max_young = get_or(p, "rigid_max_young", pp.rigid_max_young);
  }
  return c;
}

CameraSpec parse_camera(const ojson& j, const SimConfig& sim) {
  const Vec3 center = 0.5 * (sim.domain_min + sim.domain_max);
  const double ext = (sim.domain_max - sim.domain_min).maxCoeff();
  Vec3 eye = center + Vec3(0.0, 0.3 * ext, 1.8 * ext);
  Vec3 target = center;
  Vec3 up = Vec3::UnitY();
  int w = 128, h = 128;
  double fov = 40.0;
  if (!j.is_null()) {
    if (j.contains("eye")) eye = vec3(j["eye"], "camera.eye");
    if (j.contains("target")) target = vec3(j["target"], "camera.target");
    if (j.contains("up")) up = vec3(j["up"], "camera.up");
    w = get_or(j, "width", w);
    h = get_or(j, "height", h);
    fov = get_or(j, "fov_deg", fov);
  }
  auto cam = CameraSpec::look_at(eye, target, up, w, h, fov);
  if (!j.is_null()) {
    cam.splat_radius = get_or(j, "splat_radius", cam.splat_radius);
    if (j.contains("mode")) cam.mode = parse_color_mode(j["mode"].get<std::string>());
    if (j.contains("depth_range")) {
      const auto& r = j["depth_range"];
      cam.depth_range = std::make_pair(r.at(0).get<double>(), r.at(1).get<double>());
    }
  }
  cam.validate();
  return cam;
}

}  // namespace

std::string sim_config_json(const SimConfig& c) {
  ojson j;
  j["h_grid"] = c.h_grid;
  j["domain_min"] = vec_json(c.domain_min);
  j["domain_max"] = vec_json(c.domain_max);
  j["cfl"] = c.cfl;
  j["frames"] = c.frames;
  j["fps"] = c.fps;
  ojson walls = ojson::array();
  for (auto w : c.walls) walls.push_back(boundary_kind_name(w));
  j["walls"] = walls;
  j["ground"] = boundary_kind_name(c.ground);
  j["ground_height"] = c.ground_y();
  j["damping"] = c.damping;
  j["gravity"] = vec_json(c.gravity);
  j["wind"] = vec_json(c.wind);
  j["max_dt"] = c.max_dt;
  j["seed"] = c.seed;
  const auto& p = c.plasticity;
  j["plasticity"] = {{"yield_stress", p.yield_stress},
                     {"friction_angle_deg", p.friction_angle_deg},
                     {"critical_compression", p.critical_compression},
                     {"critical_stretch", p.critical_stretch},
                     {"snow_hardening", p.snow_hardening},
                     {"rigid_max_young", p.rigid_max_young}};
  return j.dump();
}

MaterialField primitive_surface(const std::string& kind, const Vec3& size, double surface_spacing,
                                MaterialClass cls, double young, double poisson, double density, double jitter,
                                std::uint64_t seed) {
  std::vector<Vec3> pts;
  if (kind == "box") {
    pts = box_shell(-0.5 * size, 0.5 * size, surface_spacing);
  } else if (kind == "sphere") {
    pts = sphere_shell(Vec3::Zero(), 0.5 * size.x(), surface_spacing);
  } else {
    fail(ErrorCode::ConfigError, "unknown primitive '" + kind + "' (box or sphere)");
  }
  if (jitter > 0.0) {
    Rng rng(seed);
    for (auto& p : pts) p += jitter * surface_spacing * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  return MaterialField::uniform(std::move(pts), cls, young, poisson, density);
}

Scene parse_scene(const std::string& json_text, const fs::path& base_dir, const SceneOverrides& ov) {
  ojson j;
  try {
    j = ojson::parse(json_text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("scene is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::ConfigError, "scene must be a JSON object");
  Scene sc;
  std::string inputs_digest = j.dump();
  try {
    sc.name = get_or<std::string>(j, "name", "scene");
    sc.sim = parse_sim(j.contains("sim") ? j["sim"] : ojson());
    if (ov.frames) sc.sim.frames = *ov.frames;
    if (ov.fps) sc.sim.fps = *ov.fps;
    if (ov.h_grid) sc.sim.h_grid = *ov.h_grid;
    if (ov.cfl) sc.sim.cfl = *ov.cfl;
    if (ov.seed) sc.sim.seed = *ov.seed;
    sc.sim.validate();

    const ojson fj = j.contains("fill") ? j["fill"] : ojson::object();
    sc.fill.spacing = get_or(fj, "spacing", 0.02);
    if (fj.contains("inside_test")) sc.fill.inside_test = parse_inside_test(fj["inside_test"].get<std::string>());
    sc.fill.knn_k = get_or(fj, "knn_k", sc.fill.knn_k);
    sc.fill.voxel_resolution = get_or(fj, "voxel_resolution", sc.fill.voxel_resolution);
    sc.fill.surface_clearance = get_or(fj, "surface_clearance", sc.fill.surface_clearance);
    if (ov.fill_spacing) sc.fill.spacing = *ov.fill_spacing;
    sc.fill.validate();

    if (!j.contains("objects") || !j["objects"].is_array() || j["objects"].empty())
      fail(ErrorCode::EmptyScene, "scene lists no objects");
    std::size_t idx = 0;
    for (const auto& oj : j["objects"]) {
      ObjectSpec spec;
      spec.name = get_or<std::string>(oj, "name", "object" + std::to_string(idx));
      MaterialField field;
      if (oj.contains("field")) {
        const auto path = base_dir / oj["field"].get<std::string>();
        const std::string bytes = detail::read_file(path.string());
        inputs_digest += "\nfield:" + sha256_hex(bytes);
        field = load_field(path.string());
      } else if (oj.contains("primitive")) {
        const auto kind = oj["primitive"].get<std::string>();
        Vec3 size = Vec3::Constant(0.2);
        if (oj.contains("size")) size = vec3(oj["size"], "object size");
        if (oj.contains("radius")) size = Vec3::Constant(2.0 * oj["radius"].get<double>());
        const ojson mj = oj.contains("material") ? oj["material"] : ojson::object();
        const auto cls_name = get_or<std::string>(mj, "class", "elastic");
        const auto cls = parse_material_class(cls_name);
        if (!cls) fail(ErrorCode::ConfigError, "unknown material class '" + cls_name + "'");
        const double surf = get_or(oj, "surface_spacing", 0.5 * sc.fill.spacing);
        field = primitive_surface(kind, size, surf, *cls, get_or(mj, "young_modulus", 1e5),
                                  get_or(mj, "poisson_ratio", 0.3), get_or(mj, "density", 1000.0),
                                  get_or(oj, "jitter", 0.0), sc.sim.seed + idx);
      } else {
        fail(ErrorCode::ConfigError, "object " + std::to_string(idx) + " needs 'field' or 'primitive'");
      }
      const bool solid = field.particle_spacing > 0.0 &&
                         std::any_of(field.interior_flag.begin(), field.interior_flag.end(), [](auto f) { return f != 0; });
      spec.field = solid ? std::move(field) : fill_solid(field, sc.fill);
      if (oj.contains("translation")) spec.translation = vec3(oj["translation"], "object translation");
      if (oj.contains("rotation_deg")) spec.rotation = euler_deg(vec3(oj["rotation_deg"], "object rotation_deg"));
      if (oj.contains("velocity")) spec.velocity = vec3(oj["velocity"], "object velocity");
      spec.kinematic = get_or(oj, "kinematic", false);
      sc.objects.push_back(std::move(spec));
      ++idx;
    }

    if (j.contains("schedule")) {
      const auto path = base_dir / j["schedule"].get<std::string>();
      sc.schedule_text = detail::read_file(path.string());
    } else {
      sc.schedule_text = get_or<std::string>(j, "schedule_text", "");
    }
    inputs_digest += "\nschedule:" + sc.schedule_text;
    sc.camera = parse_camera(j.contains("camera") ? j["camera"] : ojson(), sc.sim);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("scene: ") + e.what());
  }

  sc.scene_hash = sha256_hex(inputs_digest);
  ojson cfg;
  cfg["sim"] = ojson::parse(sim_config_json(sc.sim));
  cfg["fill"] = {{"spacing", sc.fill.spacing},
                 {"inside_test", inside_test_name(sc.fill.inside_test)},
                 {"knn_k", sc.fill.knn_k},
                 {"voxel_resolution", sc.fill.voxel_resolution},
                 {"surface_clearance", sc.fill.surface_clearance}};
  const auto& c = sc.camera;
  cfg["camera"] = {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
                   {"height", c.height}, {"splat_radius", c.splat_radius}, {"mode", color_mode_name(c.mode)}};
  sc.config_hash = sha256_hex(cfg.dump());
  return sc;
}

Scene load_scene(const fs::path& path, const SceneOverrides& overrides) {
  const std::string text = detail::read_file(path.string());
  return parse_scene(text, path.parent_path(), overrides);
}

}  // namespace mpmedit
