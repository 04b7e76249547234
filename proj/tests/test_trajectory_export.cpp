#include "mpmedit/trajectory_export.hpp"
#include "oracles/raster_oracle.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

using namespace mpmedit;
using testutil::error_code_of;
namespace fs = std::filesystem;

namespace {

TrajectoryFrame random_frame(Rng& rng, std::size_t n, std::uint64_t index, double fps) {
  TrajectoryFrame f;
  f.index = index;
  f.time = index / fps;
  for (std::size_t i = 0; i < 3 * n; ++i) f.positions.push_back(static_cast<float>(rng.uniform(-2.0, 2.0)));
  ObjectFrameStats s;
  s.centroid = Vec3(0.1, 0.2, 0.3);
  f.objects.push_back(s);
  return f;
}

Trajectory random_trajectory(std::size_t frames, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Trajectory t;
  t.fps = 24.0;
  for (std::size_t k = 0; k < frames; ++k) t.frames.push_back(random_frame(rng, n, k, t.fps));
  t.object_id.assign(n, 0);
  t.edit_log = {R"({"kind":"activate","t":0.5})"};
  t.scene_hash = "abc";
  t.config_hash = "def";
  return t;
}

CameraSpec axis_camera() {
  CameraSpec c;
  c.fx = c.fy = 100.0;
  c.cx = c.cy = 32.0;
  c.width = c.height = 64;
  c.splat_radius = 1;
  return c;
}

void flip_byte(const fs::path& p, std::size_t offset) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(static_cast<std::streamoff>(offset));
  char c = 0;
  f.read(&c, 1);
  c = static_cast<char>(c ^ 0x5a);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(&c, 1);
}

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex(std::string()) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("frame encoding round trip and header layout") {
  Rng rng(3);
  const auto f = random_frame(rng, 17, 9, 24.0);
  const auto bytes = encode_frame(f);
  REQUIRE(bytes.size() == 8 + 4 + 4 + 8 + 8 + 17 * 3 * 4);
  CHECK(bytes.substr(0, 8) == "MPMFRAME");
  std::uint64_t n = 0, idx = 0;
  std::memcpy(&n, bytes.data() + 16, 8);
  std::memcpy(&idx, bytes.data() + 24, 8);
  CHECK(n == 17);
  CHECK(idx == 9);
  const auto back = decode_frame(bytes);
  CHECK(back.index == 9);
  CHECK(std::memcmp(back.positions.data(), f.positions.data(), f.positions.size() * 4) == 0);

  CHECK(error_code_of([&] { decode_frame("NOTFRAME" + bytes.substr(8)); }) == ErrorCode::FormatError);
  CHECK(error_code_of([&] { decode_frame(bytes.substr(0, bytes.size() - 1)); }) == ErrorCode::FormatError);
  CHECK(error_code_of([&] { decode_frame(bytes.substr(0, 10)); }) == ErrorCode::FormatError);
}

TEST_CASE("one-frame export round trips bit-exactly") {
  const auto dir = testutil::scratch_dir("export_one");
  const auto t = random_trajectory(1, 50, 1);
  const auto m = export_trajectory(t, dir);
  CHECK(m.frame_count == 1);
  CHECK(fs::exists(dir / "frames"));
  CHECK(std::count_if(fs::directory_iterator(dir / "frames"), fs::directory_iterator{}, [](auto&) { return true; }) ==
        1);
  const auto back = import_trajectory(dir);
  REQUIRE(back.frames.size() == 1);
  CHECK(back.frames[0].positions == t.frames[0].positions);
  CHECK(back.fps == 24.0);
  CHECK(back.scene_hash == "abc");
  CHECK(back.config_hash == "def");
  CHECK(back.edit_log == t.edit_log);
  CHECK(verify_trajectory(dir).ok);
}

TEST_CASE("48 frames listed in order with matching hashes") {
  const auto dir = testutil::scratch_dir("export_48");
  const auto t = random_trajectory(48, 20, 2);
  ExportOptions o;
  o.camera = axis_camera();
  o.camera.center = Vec3(0, 0, -5);
  const auto m = export_trajectory(t, dir, o);
  CHECK(m.frame_count == 48);
  std::vector<std::string> frame_files;
  for (const auto& f : m.files)
    if (f.rfind("frames/", 0) == 0) frame_files.push_back(f);
  REQUIRE(frame_files.size() == 48);
  CHECK(std::is_sorted(frame_files.begin(), frame_files.end()));
  for (std::size_t k = 0; k < 48; ++k) {
    CHECK(sha256_file(dir / frame_files[k]) == sha256_hex(encode_frame(t.frames[k])));
    CHECK(m.json.find(sha256_file(dir / frame_files[k])) != std::string::npos);
  }
  const auto back = import_trajectory(dir);
  for (std::size_t k = 0; k < 48; ++k) CHECK(back.frames[k].positions == t.frames[k].positions);
  const auto rep = verify_trajectory(dir);
  CHECK(rep.ok);
  CHECK(rep.files_checked == 48 + 48 + 2);
}

TEST_CASE("tampering is detected") {
  const auto dir = testutil::scratch_dir("export_tamper");
  const auto m = export_trajectory(random_trajectory(3, 10, 4), dir);
  flip_byte(dir / "frames" / fs::path(m.files[1]).filename(), 40);
  auto rep = verify_trajectory(dir);
  CHECK_FALSE(rep.ok);
  REQUIRE(rep.problems.size() == 1);
  CHECK(rep.problems[0].find(fs::path(m.files[1]).filename().string()) != std::string::npos);

  fs::remove(dir / "edit_log.jsonl");
  rep = verify_trajectory(dir);
  CHECK(rep.problems.size() == 2);
  fs::remove(dir / "manifest.json");
  CHECK(error_code_of([&] { verify_trajectory(dir); }) == ErrorCode::IoError);
}

TEST_CASE("unwritable destination raises IoError") {
  const auto dir = testutil::scratch_dir("export_blocked");
  std::ofstream(dir / "plain_file") << "x";
  CHECK(error_code_of([&] { export_trajectory(random_trajectory(1, 4, 5), dir / "plain_file" / "out"); }) ==
        ErrorCode::IoError);
}

TEST_CASE("point on the optical axis lands on the principal point") {
  const auto img = rasterize_frame({Vec3(0, 0, 1)}, axis_camera());
  CHECK_FALSE(img.empty);
  CHECK(img.winner[32 * 64 + 32] == 0);
  // radius 1 disk: centre plus four neighbours
  CHECK(img.occupied() == 5);
  CHECK(img.winner[31 * 64 + 32] == 0);
  CHECK(img.winner[33 * 64 + 33] == -1);
}

TEST_CASE("z-buffer keeps the nearer point") {
  const std::vector<Vec3> pts{Vec3(0.02, 0.01, 2.0), Vec3(0.01, 0.005, 1.0)};
  const auto img = rasterize_frame(pts, axis_camera());
  CHECK(img.winner[33 * 64 + 33] == 1);
  CHECK(img.depth[33 * 64 + 33] == 1.0f);
  // nearest point is brightest in depth mode
  const auto tie = rasterize_frame({Vec3(0, 0, 1), Vec3(0, 0, 1)}, axis_camera());
  CHECK(tie.winner[32 * 64 + 32] == 0);
}

TEST_CASE("points behind the camera or off screen give an empty image") {
  const auto behind = rasterize_frame({Vec3(0, 0, -1)}, axis_camera());
  CHECK(behind.empty);
  CHECK(behind.occupied() == 0);
  const auto off = rasterize_frame({Vec3(10, 0, 1)}, axis_camera());
  CHECK(off.empty);
  auto bad = axis_camera();
  bad.width = 8;
  CHECK(error_code_of([&] { rasterize_frame({}, bad); }) == ErrorCode::ConfigError);
  bad = axis_camera();
  bad.fx = 0.0;
  CHECK(error_code_of([&] { rasterize_frame({}, bad); }) == ErrorCode::ConfigError);
}

TEST_CASE("rasterizer matches the per-pixel oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto cam = axis_camera();
    cam.splat_radius = trial % 3;
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i)
      pts.emplace_back(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(0.5, 3.0));
    pts.emplace_back(0, 0, -1);  // culled
    const auto img = rasterize_frame(pts, cam);
    CHECK(img.winner == oracle::brute_winners(pts, cam));
  }
}

TEST_CASE("depth shading spans the frame range") {
  const std::vector<Vec3> pts{Vec3(0, 0, 1), Vec3(0.2, 0, 2)};
  const auto img = rasterize_frame(pts, axis_camera());
  CHECK(img.rgb[3 * (32 * 64 + 32)] == 255);
  CHECK(img.rgb[3 * (32 * 64 + 42)] == 1);
  CHECK(img.rgb[0] == 0);
  const auto ppm = encode_ppm(img);
  CHECK(ppm.rfind("P6\n64 64\n255\n", 0) == 0);
  CHECK(ppm.size() == std::string("P6\n64 64\n255\n").size() + 64 * 64 * 3);

  auto fixed = axis_camera();
  fixed.depth_range = std::make_pair(0.0, 4.0);
  const auto f = rasterize_frame(pts, fixed);
  CHECK(f.rgb[3 * (32 * 64 + 32)] == 1 + static_cast<int>(std::round(254.0 * 0.75)));
}

TEST_CASE("object id colouring") {
  auto cam = axis_camera();
  cam.mode = ColorMode::ObjectId;
  const auto img = rasterize_frame({Vec3(0, 0, 1), Vec3(0.2, 0, 1)}, cam, {0, 1});
  CHECK(std::vector<std::uint8_t>(img.rgb.begin() + 3 * (32 * 64 + 32), img.rgb.begin() + 3 * (32 * 64 + 32) + 3) !=
        std::vector<std::uint8_t>(img.rgb.begin() + 3 * (32 * 64 + 52), img.rgb.begin() + 3 * (32 * 64 + 52) + 3));
  CHECK(error_code_of([&] { rasterize_frame({Vec3(0, 0, 1)}, cam, {0, 1}); }) == ErrorCode::ShapeError);
}

TEST_CASE("image does not depend on point order") {
  Rng rng(23);
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.emplace_back(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(0.5, 3.0));
  const auto a = rasterize_frame(pts, axis_camera());
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<Vec3> shuffled;
  for (auto i : perm) shuffled.push_back(pts[i]);
  const auto b = rasterize_frame(shuffled, axis_camera());
  CHECK(a.rgb == b.rgb);
  CHECK(a.depth == b.depth);
  for (std::size_t k = 0; k < a.winner.size(); ++k)
    if (b.winner[k] >= 0) CHECK(static_cast<std::int32_t>(perm[static_cast<std::size_t>(b.winner[k])]) == a.winner[k]);
}

TEST_CASE("moving the points and the camera together leaves the image unchanged") {
  Rng rng(29);
  // dyadic coordinates keep the subtraction exact
  auto dy = [&](double lo, double hi) { return std::round(rng.uniform(lo, hi) * 1024.0) / 1024.0; };
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) pts.emplace_back(dy(-0.4, 0.4), dy(-0.4, 0.4), dy(0.5, 3.0));
  auto cam = CameraSpec::look_at(Vec3(0, 0, -1), Vec3(0, 0, 1), Vec3(0, 1, 0), 64, 64, 60.0);
  const auto a = rasterize_frame(pts, cam);
  const Vec3 shift(3.0, -5.0, 7.0);
  for (auto& p : pts) p += shift;
  cam.center += shift;
  const auto b = rasterize_frame(pts, cam);
  CHECK_FALSE(a.empty);
  CHECK(a.rgb == b.rgb);
  CHECK(a.winner == b.winner);
}

TEST_CASE("bounded queue hands frames over in order under back-pressure") {
  BoundedQueue<int> q(2);
  std::vector<int> got;
  std::thread consumer([&] {
    while (auto v = q.pop()) got.push_back(*v);
  });
  for (int i = 0; i < 1000; ++i) q.push(i);
  q.close();
  consumer.join();
  REQUIRE(got.size() == 1000);
  for (int i = 0; i < 1000; ++i) CHECK(got[static_cast<std::size_t>(i)] == i);
}
