#include "mpmedit/cli_app.hpp"

#include "binary_io.hpp"
#include "mpmedit/errors.hpp"
#include "mpmedit/field_io.hpp"
#include "mpmedit/scene.hpp"
#include "mpmedit/semantic_conditioning.hpp"
#include "mpmedit/simulation.hpp"
#include "mpmedit/volumetric_fill.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

namespace mpmedit {

using ojson = nlohmann::ordered_json;

std::string subcommand_name(Subcommand s) {
  switch (s) {
    case Subcommand::Fill: return "fill";
    case Subcommand::Simulate: return "simulate";
    case Subcommand::Analyze: return "analyze";
    case Subcommand::Verify: return "verify";
  }
  return "?";
}

void RunConfig::validate() const {
  if (input.empty()) fail(ErrorCode::ConfigError, subcommand_name(command) + " needs an input path");
  if ((command == Subcommand::Fill || command == Subcommand::Simulate) && output.empty())
    fail(ErrorCode::ConfigError, subcommand_name(command) + " needs an output path");
  if (threads < 0) fail(ErrorCode::ConfigError, "threads must be >= 0");
  if (command == Subcommand::Fill) {
    if (!spacing) fail(ErrorCode::ConfigError, "fill needs --spacing");
    FillConfig fc;
    fc.spacing = *spacing;
    fc.inside_test = parse_inside_test(inside_test);
    fc.knn_k = knn;
    fc.voxel_resolution = voxel_resolution;
    fc.surface_clearance = clearance;
    fc.validate();
  }
  if (command == Subcommand::Analyze) {
    weights.validate();
    if (!(epsilon > 0.0)) fail(ErrorCode::ConfigError, "epsilon must be positive");
  }
  if (queue_capacity < 1) fail(ErrorCode::ConfigError, "queue capacity must be >= 1");
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    fail(ErrorCode::ConfigError, "config key '" + key + "': '" + v + "' is not a number");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(ErrorCode::ConfigError, "config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(ErrorCode::ConfigError, "config key '" + key + "': '" + v + "' is not a boolean");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
         std::uint64_t s = 0;
         const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
         if (ec != std::errc() || p != v.data() + v.size())
           fail(ErrorCode::ConfigError, "config key '" + k + "': seed must be an unsigned 64-bit integer");
         c.seed = s;
       }},
      {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = static_cast<int>(parse_int(k, v)); }},
      {"verbosity", [](RunConfig& c, const std::string& k, const std::string& v) { c.verbosity = static_cast<int>(parse_int(k, v)); }},
      {"spacing", [](RunConfig& c, const std::string& k, const std::string& v) { c.spacing = parse_double(k, v); }},
      {"inside_test", [](RunConfig& c, const std::string&, const std::string& v) { c.inside_test = v; }},
      {"knn", [](RunConfig& c, const std::string& k, const std::string& v) { c.knn = static_cast<int>(parse_int(k, v)); }},
      {"voxel_resolution", [](RunConfig& c, const std::string& k, const std::string& v) { c.voxel_resolution = static_cast<int>(parse_int(k, v)); }},
      {"clearance", [](RunConfig& c, const std::string& k, const std::string& v) { c.clearance = parse_double(k, v); }},
      {"frames", [](RunConfig& c, const std::string& k, const std::string& v) { c.frames = static_cast<int>(parse_int(k, v)); }},
      {"fps", [](RunConfig& c, const std::string& k, const std::string& v) { c.fps = parse_double(k, v); }},
      {"h_grid", [](RunConfig& c, const std::string& k, const std::string& v) { c.h_grid = parse_double(k, v); }},
      {"cfl", [](RunConfig& c, const std::string& k, const std::string& v) { c.cfl = parse_double(k, v); }},
      {"render", [](RunConfig& c, const std::string& k, const std::string& v) { c.render = parse_bool(k, v); }},
      {"queue_capacity", [](RunConfig& c, const std::string& k, const std::string& v) { c.queue_capacity = static_cast<std::size_t>(parse_int(k, v)); }},
      {"lambda_reg", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.reg = parse_double(k, v); }},
      {"lambda_cls", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.cls = parse_double(k, v); }},
      {"lambda_smooth", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.smooth = parse_double(k, v); }},
      {"lambda_con", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.con = parse_double(k, v); }},
      {"lambda_assign", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.assign = parse_double(k, v); }},
      {"tau", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.temperature = parse_double(k, v); }},
      {"margin", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.margin = parse_double(k, v); }},
      {"smooth_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.smooth_k = static_cast<int>(parse_int(k, v)); }},
      {"epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.epsilon = parse_double(k, v); }},
      {"triplets", [](RunConfig& c, const std::string& k, const std::string& v) { c.triplets = static_cast<std::size_t>(parse_int(k, v)); }},
  };
  return table;
}

MatrixX matrix_from(const ojson& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) fail(ErrorCode::FormatError, what + " must be a non-empty 2-D array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixX m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(ErrorCode::ShapeError, what + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

void configure_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
}

int run_fill(const RunConfig& cfg, std::ostream& out) {
  FillConfig fc;
  fc.spacing = *cfg.spacing;
  fc.inside_test = parse_inside_test(cfg.inside_test);
  fc.knn_k = cfg.knn;
  fc.voxel_resolution = cfg.voxel_resolution;
  fc.surface_clearance = cfg.clearance;
  const auto surface = load_field(cfg.input);
  FillReport rep;
  const auto solid = fill_solid(surface, fc, &rep);
  save_field(solid, cfg.output);
  ojson j;
  j["command"] = "fill";
  j["surface_points"] = surface.size();
  j["interior_points"] = rep.interior_points;
  j["total_points"] = solid.size();
  j["spacing"] = fc.spacing;
  j["inside_test"] = inside_test_name(fc.inside_test);
  if (fc.inside_test == InsideTest::VoxelFlood) {
    j["voxel_size"] = rep.voxel_size;
    j["voxel_dims"] = {rep.voxel_dims.x(), rep.voxel_dims.y(), rep.voxel_dims.z()};
  }
  j["output"] = cfg.output;
  out << j.dump() << "\n";
  return 0;
}

int run_simulate(const RunConfig& cfg, std::ostream& out) {
  SceneOverrides ov;
  ov.frames = cfg.frames;
  ov.fps = cfg.fps;
  ov.h_grid = cfg.h_grid;
  ov.cfl = cfg.cfl;
  ov.fill_spacing = cfg.spacing;
  ov.seed = cfg.seed;
  const auto scene = load_scene(cfg.input, ov);
  auto state = build_state(scene.objects, scene.sim);
  const auto schedule = compile_schedule(scene.schedule_text, scene_info(state));
  ExportOptions opts;
  opts.write_conditioning = cfg.render;
  opts.camera = scene.camera;
  const auto manifest = simulate_to_directory(state, schedule, scene.sim, cfg.output, opts, scene.scene_hash,
                                              scene.config_hash, cfg.queue_capacity);
  ojson j;
  j["command"] = "simulate";
  j["scene"] = scene.name;
  j["frames"] = manifest.frame_count;
  j["particles"] = state.size();
  j["substeps"] = state.substeps;
  j["interventions"] = schedule.items.size();
  j["manifest_sha256"] = sha256_hex(manifest.json);
  j["scene_hash"] = scene.scene_hash;
  j["config_hash"] = scene.config_hash;
  j["output"] = cfg.output;
  out << j.dump() << "\n";
  return 0;
}

int run_analyze(const RunConfig& cfg, std::ostream& out) {
  const std::string text = detail::read_file(cfg.input);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::FormatError, cfg.input + ": " + e.what());
  }
  if (j.value("format", "") != "mpmedit.analysis_fixture")
    fail(ErrorCode::FormatError, cfg.input + ": not an analysis fixture");

  const auto& w = cfg.weights;
  GradCheckInputs gi;
  std::size_t sampled = 0;
  try {
    std::vector<Vec3> positions;
    for (const auto& p : j.at("positions")) positions.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    gi.class_logits = matrix_from(j.at("class_logits"), "class_logits");
    gi.pred_params = matrix_from(j.at("pred_params"), "pred_params");
    gi.raw_logits = matrix_from(j.at("raw_logits"), "raw_logits");
    const auto& tj = j.at("targets");
    gi.targets.class_labels = tj.at("class_labels").get<std::vector<std::int32_t>>();
    gi.targets.params = matrix_from(tj.at("params"), "targets.params");
    gi.targets.part_labels = tj.at("part_labels").get<std::vector<std::int32_t>>();
    for (const auto& [k, v] : tj.at("prompt_of_part").items())
      gi.targets.prompt_of_part[static_cast<std::int32_t>(std::stol(k))] = v.get<std::int32_t>();
    gi.field = decode_material_field(row_softmax(gi.class_logits), gi.pred_params, positions);
    gi.field.part_label = gi.targets.part_labels;
    if (j.contains("triplets")) {
      for (const auto& t : j["triplets"])
        gi.triplets.push_back({t.at(0).get<std::size_t>(), t.at(1).get<std::size_t>(), t.at(2).get<std::size_t>()});
    } else {
      gi.triplets = sample_triplets(gi.field, cfg.triplets, cfg.seed);
      sampled = gi.triplets.size();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, cfg.input + ": " + e.what());
  }

  LossInputs li;
  li.pred_probs = row_softmax(gi.class_logits);
  li.pred_params = gi.pred_params;
  li.field = gi.field;
  li.triplets = gi.triplets;
  li.raw_logits = gi.raw_logits;
  li.targets = gi.targets;
  const auto b = total_loss(li, w);

  ojson rep;
  rep["command"] = "analyze";
  rep["fixture"] = cfg.input;
  rep["points"] = gi.field.size();
  rep["triplets"] = gi.triplets.size();
  rep["triplets_sampled"] = sampled > 0;
  rep["seed"] = cfg.seed;
  rep["weights"] = {{"lambda_reg", w.reg},       {"lambda_cls", w.cls},     {"lambda_smooth", w.smooth},
                    {"lambda_con", w.con},       {"lambda_assign", w.assign}, {"tau", w.temperature},
                    {"margin", w.margin},        {"huber_delta", w.huber_delta}, {"smooth_k", w.smooth_k}};
  rep["losses"] = {{"task", b.task},
                   {"smoothness", b.smooth},
                   {"contrastive", b.contrastive},
                   {"assignment", b.assignment},
                   {"total", b.total}};
  ojson gc;
  bool all_ok = true;
  for (auto kind : {LossKind::Task, LossKind::Smoothness, LossKind::Contrastive, LossKind::Assignment}) {
    ojson e;
    try {
      const auto r = finite_diff_check(kind, gi, w, cfg.epsilon);
      e["max_rel_error"] = r.max_rel_error;
      e["parameters"] = r.parameters;
      e["status"] = r.max_rel_error < 1e-4 ? "ok" : "mismatch";
      if (r.max_rel_error >= 1e-4) all_ok = false;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::NonSmoothPoint) throw;
      e["status"] = "non_smooth";
      e["detail"] = err.what();
    }
    gc[loss_kind_name(kind)] = e;
  }
  rep["grad_check"] = gc;
  rep["grad_check_epsilon"] = cfg.epsilon;
  const std::string dumped = rep.dump(2) + "\n";
  if (!cfg.output.empty()) detail::write_file(cfg.output, dumped);
  out << dumped;
  return all_ok ? 0 : static_cast<int>(ErrorCode::NumericalError);
}

int run_verify(const RunConfig& cfg, std::ostream& out) {
  const auto rep = verify_trajectory(cfg.input);
  ojson j;
  j["command"] = "verify";
  j["directory"] = cfg.input;
  j["ok"] = rep.ok;
  j["files_checked"] = rep.files_checked;
  j["problems"] = rep.problems;
  out << j.dump(2) << "\n";
  return rep.ok ? 0 : static_cast<int>(ErrorCode::IntegrityError);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& t = setters();
  const auto it = t.find(key);
  if (it == t.end()) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  const std::string text = detail::read_file(path);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, path + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::ConfigError, path + ": config file must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    std::string s;
    if (v.is_string()) {
      s = v.get<std::string>();
    } else if (v.is_boolean()) {
      s = v.get<bool>() ? "true" : "false";
    } else if (v.is_number()) {
      s = v.dump();
    } else {
      fail(ErrorCode::ConfigError, path + ": key '" + k + "' must be a scalar");
    }
    set_config_value(cfg, k, s);
  }
}

void apply_environment(RunConfig& cfg, const std::function<const char*(const char*)>& getenv_fn) {
  for (const auto& key : config_keys()) {
    std::string var = "MPMEDIT_" + key;
    std::transform(var.begin(), var.end(), var.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* v = getenv_fn(var.c_str())) set_config_value(cfg, key, v);
  }
}

std::string error_record(int code, const std::string& name, const std::string& message) {
  ojson j;
  j["error"] = name;
  j["code"] = code;
  j["message"] = message;
  return j.dump();
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    configure_threads(config);
    switch (config.command) {
      case Subcommand::Fill: return run_fill(config, out);
      case Subcommand::Simulate: return run_simulate(config, out);
      case Subcommand::Analyze: return run_analyze(config, out);
      case Subcommand::Verify: {
        const int rc = run_verify(config, out);
        if (rc != 0) err << error_record(rc, "IntegrityError", "trajectory failed verification") << "\n";
        return rc;
      }
    }
  } catch (const Error& e) {
    err << error_record(static_cast<int>(e.code()), std::string(e.name()), e.what()) << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << error_record(1, "InternalError", e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mpmedit
