#include "mpmedit/cli_app.hpp"
#include "mpmedit/errors.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

namespace {

struct FlagSpec {
  const char* key;
  const char* help;
};

// Flags shared by every subcommand, then the per-command ones.
const FlagSpec kCommon[] = {
    {"seed", "RNG seed"},
    {"threads", "worker threads, 0 keeps the default"},
    {"verbosity", "0 quiet, 1 normal, 2 chatty"},
};
const FlagSpec kFill[] = {
    {"spacing", "interior lattice spacing in metres"},
    {"inside_test", "voxel_flood or winding_number"},
    {"knn", "surface neighbours blended per interior point"},
    {"voxel_resolution", "voxels along the longest axis, 0 = spacing/2"},
    {"clearance", "minimum gap to the surface as a fraction of spacing"},
};
const FlagSpec kSimulate[] = {
    {"frames", "frames to export, counting the initial state"},
    {"fps", "frames per second"},
    {"h_grid", "background grid spacing"},
    {"cfl", "CFL number"},
    {"spacing", "interior fill spacing for primitive objects"},
    {"render", "write conditioning images (true/false)"},
    {"queue_capacity", "frames buffered ahead of the writer"},
};
const FlagSpec kAnalyze[] = {
    {"lambda_reg", "regression weight"},  {"lambda_cls", "classification weight"},
    {"lambda_smooth", "smoothness weight"}, {"lambda_con", "contrastive weight"},
    {"lambda_assign", "assignment weight"}, {"tau", "assignment temperature"},
    {"margin", "triplet margin"},         {"smooth_k", "smoothness neighbours"},
    {"epsilon", "finite-difference step"}, {"triplets", "triplets sampled when the fixture has none"},
};

std::string flag_name(const char* key) {
  std::string s = key;
  for (auto& c : s)
    if (c == '_') c = '-';
  return "--" + s;
}

template <std::size_t N>
void add_flags(CLI::App* app, const FlagSpec (&specs)[N], std::map<std::string, std::string>& values) {
  for (const auto& s : specs) app->add_option(flag_name(s.key), values[s.key], s.help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mpmedit: material fields, volumetric fill, MPM simulation with scheduled edits"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file of config keys (lowest precedence)");

  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> inputs, outputs;

  auto* fill = app.add_subcommand("fill", "fill a closed surface field with interior particles");
  fill->add_option("input", inputs["fill"], "surface field (.json or .mpf)")->required();
  fill->add_option("-o,--output", outputs["fill"], "solid field to write")->required();
  add_flags(fill, kCommon, flags["fill"]);
  add_flags(fill, kFill, flags["fill"]);

  auto* sim = app.add_subcommand("simulate", "run a scene and export its trajectory");
  sim->add_option("scene", inputs["simulate"], "scene JSON")->required();
  sim->add_option("-o,--output", outputs["simulate"], "trajectory directory")->required();
  add_flags(sim, kCommon, flags["simulate"]);
  add_flags(sim, kSimulate, flags["simulate"]);

  auto* analyze = app.add_subcommand("analyze", "evaluate the supervision losses on a labelled fixture");
  analyze->add_option("fixture", inputs["analyze"], "analysis fixture JSON")->required();
  analyze->add_option("-o,--output", outputs["analyze"], "also write the report here");
  add_flags(analyze, kCommon, flags["analyze"]);
  add_flags(analyze, kAnalyze, flags["analyze"]);

  auto* verify = app.add_subcommand("verify", "check a trajectory directory against its manifest");
  verify->add_option("directory", inputs["verify"], "trajectory directory")->required();
  add_flags(verify, kCommon, flags["verify"]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cerr << mpmedit::error_record(static_cast<int>(mpmedit::ErrorCode::ConfigError), "ConfigError", e.what())
              << "\n";
    return static_cast<int>(mpmedit::ErrorCode::ConfigError);
  }

  mpmedit::RunConfig cfg;
  std::string name;
  if (fill->parsed()) {
    cfg.command = mpmedit::Subcommand::Fill;
    name = "fill";
  } else if (sim->parsed()) {
    cfg.command = mpmedit::Subcommand::Simulate;
    name = "simulate";
  } else if (analyze->parsed()) {
    cfg.command = mpmedit::Subcommand::Analyze;
    name = "analyze";
  } else {
    cfg.command = mpmedit::Subcommand::Verify;
    name = "verify";
  }
  auto* sub = app.get_subcommand(name);

  try {
    if (!config_path.empty()) mpmedit::apply_config_file(cfg, config_path);
    mpmedit::apply_environment(cfg, [](const char* k) { return std::getenv(k); });
    for (const auto& [key, value] : flags[name])
      if (sub->count(flag_name(key.c_str())) > 0) mpmedit::set_config_value(cfg, key, value);
  } catch (const mpmedit::Error& e) {
    std::cerr << mpmedit::error_record(static_cast<int>(e.code()), std::string(e.name()), e.what()) << "\n";
    return static_cast<int>(e.code());
  }
  cfg.input = inputs[name];
  cfg.output = outputs[name];
  return mpmedit::run(cfg, std::cout, std::cerr);
}
