#pragma once

#include "mpmedit/physics_supervision.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mpmedit {

enum class Subcommand { Fill, Simulate, Analyze, Verify };

std::string subcommand_name(Subcommand s);

struct RunConfig {
  Subcommand command = Subcommand::Verify;
  std::string input;
  std::string output;
  std::uint64_t seed = 42;
  int threads = 0;  // 0 keeps the OpenMP default
  int verbosity = 1;

  // fill
  std::optional<double> spacing;
  std::string inside_test = "voxel_flood";
  int knn = 1;
  int voxel_resolution = 0;
  double clearance = 0.25;

  // simulate
  std::optional<int> frames;
  std::optional<double> fps;
  std::optional<double> h_grid;
  std::optional<double> cfl;
  bool render = true;
  std::size_t queue_capacity = 4;

  // analyze
  LossWeights weights{};
  double epsilon = 1e-5;
  std::size_t triplets = 64;

  void validate() const;
};

// Every key accepted by config files and MPMEDIT_<KEY> environment variables.
std::vector<std::string> config_keys();

// Sets one key from its string form. Throws ConfigError on unknown keys or
// unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// JSON object of key -> value, lowest precedence.
void apply_config_file(RunConfig& cfg, const std::string& path);

// MPMEDIT_<KEY> variables, applied over the config file.
void apply_environment(RunConfig& cfg, const std::function<const char*(const char*)>& getenv_fn);

/// Runs one subcommand. Machine-readable results go to `out`; on failure an
/// error record goes to `err` and the return value is the error code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

// The error record written to stderr, e.g. {"error":"ParseError","code":40,...}.
std::string error_record(int code, const std::string& name, const std::string& message);

}  // namespace mpmedit
