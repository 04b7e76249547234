#include "mpmedit/cli_app.hpp"
#include "mpmedit/field_io.hpp"
#include "mpmedit/primitives.hpp"
#include "test_util.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

using namespace mpmedit;
using testutil::error_code_of;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MPMEDIT_SOURCE_DIR;
const std::string kCli = MPMEDIT_CLI_PATH;

struct Result {
  int rc = 0;
  std::string out, err;
};

Result run_api(const RunConfig& c) {
  std::ostringstream out, err;
  Result r;
  r.rc = run(c, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Runs the binary; stderr is folded into the captured text.
Result run_cli(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + kCli + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string write_shell(const fs::path& dir) {
  const auto f = MaterialField::uniform(box_shell(Vec3::Zero(), Vec3::Constant(0.3), 0.02), MaterialClass::Elastic,
                                        1e5, 0.3, 1000.0);
  const auto path = (dir / "shell.json").string();
  save_field(f, path);
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("run config validation") {
  RunConfig c;
  c.command = Subcommand::Fill;
  c.input = "in.json";
  c.output = "out.json";
  CHECK(error_code_of([&] { c.validate(); }) == ErrorCode::ConfigError);  // no spacing
  c.spacing = 0.0;
  CHECK(error_code_of([&] { c.validate(); }) == ErrorCode::ConfigError);
  c.spacing = 0.05;
  CHECK(error_code_of([&] { c.validate(); }) == ErrorCode::Ok);
  c.output.clear();
  CHECK(error_code_of([&] { c.validate(); }) == ErrorCode::ConfigError);

  RunConfig v;
  v.command = Subcommand::Verify;
  CHECK(error_code_of([&] { v.validate(); }) == ErrorCode::ConfigError);
  v.input = "dir";
  CHECK(error_code_of([&] { v.validate(); }) == ErrorCode::Ok);
  v.queue_capacity = 0;
  CHECK(error_code_of([&] { v.validate(); }) == ErrorCode::ConfigError);
}

TEST_CASE("fill with zero spacing fails with an error record") {
  const auto dir = testutil::scratch_dir("cli_spacing");
  RunConfig c;
  c.command = Subcommand::Fill;
  c.input = write_shell(dir);
  c.output = (dir / "solid.json").string();
  c.spacing = 0.0;
  const auto r = run_api(c);
  CHECK(r.rc == static_cast<int>(ErrorCode::ConfigError));
  const auto rec = nlohmann::json::parse(r.err);
  CHECK(rec["error"] == "ConfigError");
  CHECK(rec["code"] == static_cast<int>(ErrorCode::ConfigError));
  CHECK_FALSE(fs::exists(c.output));

  const auto cli = run_cli("fill " + c.input + " -o " + c.output + " --spacing 0");
  CHECK(cli.rc != 0);
  CHECK(cli.out.find("\"error\"") != std::string::npos);
}

TEST_CASE("fill writes a solid field and is reproducible") {
  const auto dir = testutil::scratch_dir("cli_fill");
  const auto shell = write_shell(dir);
  const auto a = run_cli("fill " + shell + " -o " + (dir / "a.mpf").string() + " --spacing 0.03");
  const auto b = run_cli("fill " + shell + " -o " + (dir / "b.mpf").string() + " --spacing 0.03");
  REQUIRE(a.rc == 0);
  REQUIRE(b.rc == 0);
  CHECK(slurp(dir / "a.mpf") == slurp(dir / "b.mpf"));
  const auto rep = nlohmann::json::parse(a.out);
  CHECK(rep["interior_points"].get<int>() > 500);
  CHECK(load_field((dir / "a.mpf").string()).size() == rep["total_points"].get<std::size_t>());
}

TEST_CASE("configuration layering: file, then environment, then flags") {
  const auto dir = testutil::scratch_dir("cli_layers");
  const auto file = dir / "cfg.json";
  std::ofstream(file) << R"({"seed": 1, "knn": 2, "clearance": 0.4, "render": false})";

  RunConfig c;
  apply_config_file(c, file.string());
  CHECK(c.seed == 1);
  CHECK(c.knn == 2);
  CHECK(c.clearance == 0.4);
  CHECK_FALSE(c.render);

  std::map<std::string, std::string> env{{"MPMEDIT_SEED", "2"}, {"MPMEDIT_KNN", "3"}};
  apply_environment(c, [&](const char* k) -> const char* {
    const auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.seed == 2);
  CHECK(c.knn == 3);
  CHECK(c.clearance == 0.4);

  set_config_value(c, "seed", "3");
  CHECK(c.seed == 3);
  CHECK(c.knn == 3);

  CHECK(error_code_of([&] { set_config_value(c, "nonsense", "1"); }) == ErrorCode::ConfigError);
  CHECK(error_code_of([&] { set_config_value(c, "knn", "two"); }) == ErrorCode::ConfigError);
  CHECK(error_code_of([&] { set_config_value(c, "seed", "-4"); }) == ErrorCode::ConfigError);
  std::ofstream(dir / "bad.json") << R"({"bogus": 1})";
  CHECK(error_code_of([&] { apply_config_file(c, (dir / "bad.json").string()); }) == ErrorCode::ConfigError);

  // through the binary: analyze echoes the effective weights
  const auto fixture = (kSource / "fixtures" / "labeled_field.json").string();
  std::ofstream(dir / "w.json") << R"({"lambda_con": 0.25, "lambda_smooth": 0.5})";
  const auto r = run_cli("--config " + (dir / "w.json").string() + " analyze " + fixture + " --lambda-smooth 0.75",
                         "MPMEDIT_LAMBDA_SMOOTH=0.6 MPMEDIT_LAMBDA_CON=0.125");
  REQUIRE(r.rc == 0);
  const auto rep = nlohmann::json::parse(r.out);
  CHECK(rep["weights"]["lambda_con"] == 0.125);
  CHECK(rep["weights"]["lambda_smooth"] == 0.75);
}

TEST_CASE("help lists every flag and unknown flags fail fast") {
  std::string all;
  for (const char* sub : {"fill", "simulate", "analyze", "verify"}) {
    const auto r = run_cli(std::string(sub) + " --help");
    CHECK(r.rc == 0);
    all += r.out;
  }
  all += run_cli("--help").out;
  for (auto key : config_keys()) {
    for (auto& ch : key)
      if (ch == '_') ch = '-';
    CHECK_MESSAGE(all.find("--" + key) != std::string::npos, key);
  }
  CHECK(all.find("--config") != std::string::npos);

  const auto bad = run_cli("fill x -o y --spacing 0.1 --no-such-flag 3");
  CHECK(bad.rc == static_cast<int>(ErrorCode::ConfigError));
  CHECK(bad.out.find("\"error\"") != std::string::npos);
  CHECK(run_cli("").rc != 0);
}

TEST_CASE("analyze on the bundled fixture echoes the loss weights") {
  RunConfig c;
  c.command = Subcommand::Analyze;
  c.input = (kSource / "fixtures" / "labeled_field.json").string();
  const auto r = run_api(c);
  REQUIRE(r.rc == 0);
  const auto rep = nlohmann::json::parse(r.out);
  const auto& w = rep["weights"];
  CHECK(w["lambda_reg"] == 1.0);
  CHECK(w["lambda_cls"] == 0.3);
  CHECK(w["lambda_smooth"] == 0.02);
  CHECK(w["lambda_con"] == 5e-4);
  CHECK(w["lambda_assign"] == 0.1);
  for (const auto& [k, v] : rep["grad_check"].items()) CHECK_MESSAGE(v["status"] == "ok", k);
  const auto& l = rep["losses"];
  const double recomposed = l["task"].get<double>() + 0.02 * l["smoothness"].get<double>() +
                            5e-4 * l["contrastive"].get<double>() + 0.1 * l["assignment"].get<double>();
  CHECK(testutil::rel_err(recomposed, l["total"].get<double>()) < 1e-12);

  RunConfig missing = c;
  missing.input = "/nonexistent/fixture.json";
  CHECK(run_api(missing).rc == static_cast<int>(ErrorCode::IoError));
}

TEST_CASE("drop_cube twice gives identical manifests, verify catches tampering") {
  const auto dir = testutil::scratch_dir("cli_sim");
  RunConfig c;
  c.command = Subcommand::Simulate;
  c.input = (kSource / "scenes" / "drop_cube.json").string();
  c.seed = 42;
  c.output = (dir / "a").string();
  const auto a = run_api(c);
  c.output = (dir / "b").string();
  const auto b = run_api(c);
  REQUIRE(a.rc == 0);
  REQUIRE(b.rc == 0);
  const auto ja = nlohmann::json::parse(a.out), jb = nlohmann::json::parse(b.out);
  CHECK(ja["manifest_sha256"] == jb["manifest_sha256"]);
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(ja["frames"].get<int>() >= 12);

  RunConfig v;
  v.command = Subcommand::Verify;
  v.input = (dir / "a").string();
  CHECK(run_api(v).rc == 0);
  {
    std::ofstream(dir / "a" / "edit_log.jsonl", std::ios::app) << "{}\n";
  }
  const auto t = run_api(v);
  CHECK(t.rc == static_cast<int>(ErrorCode::IntegrityError));
  CHECK(nlohmann::json::parse(t.err)["error"] == "IntegrityError");
  CHECK(run_cli("verify " + (dir / "b").string()).rc == 0);
  CHECK(run_cli("verify " + (dir / "a").string()).rc == static_cast<int>(ErrorCode::IntegrityError));
}

TEST_CASE("error records are single-line JSON") {
  const auto rec = error_record(40, "ParseError", "line 1, column 3: \"bad\"\nsecond");
  CHECK(rec.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(rec);
  CHECK(j["code"] == 40);
  CHECK(j["error"] == "ParseError");
  CHECK(j["message"].get<std::string>().find("second") != std::string::npos);
}
