#include "mpmedit/trajectory_export.hpp"

#include "binary_io.hpp"
#include "mpmedit/errors.hpp"

#include <Eigen/Geometry>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace mpmedit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kFrameMagic = "MPMFRAME";
constexpr std::uint32_t kFrameVersion = 1;
constexpr std::string_view kManifestFormat = "mpmedit.trajectory";

std::string hex(const unsigned char* d, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = digits[d[i] >> 4];
    s[2 * i + 1] = digits[d[i] & 15];
  }
  return s;
}

std::string frame_name(const std::string& prefix, std::uint64_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(index));
  return prefix + buf + ext;
}

ojson vec_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::IoError, "SHA-256 computation failed");
  return hex(digest, len);
}

std::string sha256_hex(const std::string& bytes) { return sha256_hex(bytes.data(), bytes.size()); }

std::string sha256_file(const fs::path& path) { return sha256_hex(detail::read_file(path.string())); }

std::string encode_frame(const TrajectoryFrame& frame) {
  if (frame.positions.size() % 3 != 0) fail(ErrorCode::ShapeError, "frame positions must be N x 3");
  detail::ByteWriter w;
  w.bytes(kFrameMagic);
  w.put<std::uint32_t>(kFrameVersion);
  w.put<std::uint32_t>(0);
  w.put<std::uint64_t>(frame.particle_count());
  w.put<std::uint64_t>(frame.index);
  for (float f : frame.positions) w.put(f);
  return w.take();
}

TrajectoryFrame decode_frame(const std::string& bytes) {
  detail::ByteReader r(bytes, "frame file");
  if (r.bytes(kFrameMagic.size()) != kFrameMagic) fail(ErrorCode::FormatError, "frame file: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kFrameVersion)
    fail(ErrorCode::FormatError, "frame file: unsupported version " + std::to_string(version));
  r.get<std::uint32_t>();
  const auto n = r.get<std::uint64_t>();
  TrajectoryFrame f;
  f.index = r.get<std::uint64_t>();
  if (r.remaining() != n * 3 * sizeof(float))
    fail(ErrorCode::FormatError, "frame file: payload size does not match N = " + std::to_string(n));
  f.positions.resize(static_cast<std::size_t>(n * 3));
  for (auto& v : f.positions) v = r.get<float>();
  return f;
}

// ---------------------------------------------------------------------------

std::string color_mode_name(ColorMode m) { return m == ColorMode::Depth ? "depth" : "object_id"; }

ColorMode parse_color_mode(const std::string& name) {
  if (name == "depth") return ColorMode::Depth;
  if (name == "object_id") return ColorMode::ObjectId;
  fail(ErrorCode::ConfigError, "unknown color mode '" + name + "'");
}

void CameraSpec::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::ConfigError, "camera focal lengths must be positive");
  if (width < 16 || height < 16) fail(ErrorCode::ConfigError, "image must be at least 16 x 16");
  if (splat_radius < 0 || splat_radius > 64) fail(ErrorCode::ConfigError, "splat radius must be in [0, 64]");
  if (!rotation.allFinite() || !center.allFinite()) fail(ErrorCode::ConfigError, "non-finite camera pose");
  if (depth_range && !(depth_range->first < depth_range->second))
    fail(ErrorCode::ConfigError, "fixed depth range needs near < far");
}

CameraSpec CameraSpec::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                               double fov_y_deg) {
  CameraSpec c;
  const Vec3 fwd = (target - eye).normalized();
  const Vec3 right = fwd.cross(up).normalized();
  const Vec3 down = fwd.cross(right);
  c.rotation.row(0) = right.transpose();
  c.rotation.row(1) = down.transpose();
  c.rotation.row(2) = fwd.transpose();
  c.center = eye;
  c.width = width;
  c.height = height;
  c.fy = 0.5 * height / std::tan(0.5 * fov_y_deg * std::numbers::pi / 180.0);
  c.fx = c.fy;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  return c;
}

std::size_t Image::occupied() const {
  return static_cast<std::size_t>(std::count_if(winner.begin(), winner.end(), [](auto w) { return w >= 0; }));
}

Image rasterize_frame(const std::vector<Vec3>& positions, const CameraSpec& cam,
                      const std::vector<std::int32_t>& object_id) {
  cam.validate();
  if (!object_id.empty() && object_id.size() != positions.size())
    fail(ErrorCode::ShapeError, "object id list must match the point count");
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  const std::size_t pixels = static_cast<std::size_t>(cam.width) * cam.height;
  img.depth.assign(pixels, std::numeric_limits<float>::infinity());
  img.winner.assign(pixels, -1);
  img.rgb.assign(pixels * 3, 0);
  std::vector<double> zbuf(pixels, std::numeric_limits<double>::infinity());
  const int r = cam.splat_radius;

  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Vec3 pc = cam.rotation * (positions[i] - cam.center);
    if (!(pc.z() > 1e-9)) continue;
    const double u = cam.fx * pc.x() / pc.z() + cam.cx;
    const double v = cam.fy * pc.y() / pc.z() + cam.cy;
    if (!(u > -r - 1.0 && u < cam.width + r + 1.0 && v > -r - 1.0 && v < cam.height + r + 1.0)) continue;
    const int ci = static_cast<int>(std::floor(u + 0.5));
    const int cj = static_cast<int>(std::floor(v + 0.5));
    for (int dj = -r; dj <= r; ++dj) {
      for (int di = -r; di <= r; ++di) {
        if (di * di + dj * dj > r * r) continue;
        const int px = ci + di, py = cj + dj;
        if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
        const std::size_t k = static_cast<std::size_t>(py) * cam.width + px;
        // Points arrive in index order, so strict < keeps the lower index on ties.
        if (pc.z() < zbuf[k]) {
          zbuf[k] = pc.z();
          img.winner[k] = static_cast<std::int32_t>(i);
        }
      }
    }
  }

  double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
  for (std::size_t k = 0; k < pixels; ++k) {
    if (img.winner[k] < 0) continue;
    img.empty = false;
    img.depth[k] = static_cast<float>(zbuf[k]);
    zmin = std::min(zmin, zbuf[k]);
    zmax = std::max(zmax, zbuf[k]);
  }
  if (cam.depth_range) std::tie(zmin, zmax) = *cam.depth_range;

  static constexpr std::array<std::array<std::uint8_t, 3>, 8> palette{{{230, 25, 75},
                                                                      {60, 180, 75},
                                                                      {255, 225, 25},
                                                                      {0, 130, 200},
                                                                      {245, 130, 48},
                                                                      {145, 30, 180},
                                                                      {70, 240, 240},
                                                                      {240, 50, 230}}};
  for (std::size_t k = 0; k < pixels; ++k) {
    const auto w = img.winner[k];
    if (w < 0) continue;
    std::array<std::uint8_t, 3> c{};
    if (cam.mode == ColorMode::ObjectId) {
      const auto id = object_id.empty() ? 0 : object_id[static_cast<std::size_t>(w)];
      c = palette[static_cast<std::size_t>(id) % palette.size()];
    } else {
      double level = 255.0;
      if (zmax > zmin) {
        const double a = std::clamp((zmax - zbuf[k]) / (zmax - zmin), 0.0, 1.0);
        level = 1.0 + std::round(254.0 * a);
      }
      c.fill(static_cast<std::uint8_t>(level));
    }
    std::copy(c.begin(), c.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(3 * k));
  }
  return img;
}

std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

// ---------------------------------------------------------------------------

TrajectoryWriter::TrajectoryWriter(fs::path dir, ExportOptions opts) : dir_(std::move(dir)), opts_(std::move(opts)) {}

void TrajectoryWriter::begin(double fps, std::vector<std::int32_t> object_id) {
  if (!(fps > 0.0)) fail(ErrorCode::ConfigError, "fps must be positive");
  fps_ = fps;
  object_id_ = std::move(object_id);
  make_dirs(dir_ / "frames");
  if (opts_.write_conditioning) {
    opts_.camera.validate();
    make_dirs(dir_ / "conditioning");
  }
}

void TrajectoryWriter::add(const TrajectoryFrame& frame) {
  if (entries_.empty()) {
    n_ = frame.particle_count();
  } else if (frame.particle_count() != n_) {
    fail(ErrorCode::ShapeError, "frame " + std::to_string(frame.index) + " has a different particle count");
  }
  Entry e;
  e.index = frame.index;
  e.time = frame.time;
  e.file = "frames/" + frame_name(opts_.frame_prefix, frame.index, ".bin");
  const std::string bytes = encode_frame(frame);
  detail::write_file((dir_ / e.file).string(), bytes);
  e.sha = sha256_hex(bytes);
  if (opts_.write_conditioning) {
    std::vector<Vec3> pts(frame.particle_count());
    for (std::size_t i = 0; i < pts.size(); ++i)
      pts[i] = Vec3(frame.positions[3 * i], frame.positions[3 * i + 1], frame.positions[3 * i + 2]);
    const auto img = rasterize_frame(pts, opts_.camera, object_id_);
    const std::string ppm = encode_ppm(img);
    e.image_file = "conditioning/" + frame_name(opts_.frame_prefix, frame.index, ".ppm");
    detail::write_file((dir_ / e.image_file).string(), ppm);
    e.image_sha = sha256_hex(ppm);
  }
  entries_.push_back(std::move(e));
  object_stats_.push_back(frame.objects);
}

Manifest TrajectoryWriter::finish(const std::vector<std::string>& edit_log, const std::string& scene_hash,
                                  const std::string& config_hash) {
  std::string log_text;
  for (const auto& l : edit_log) log_text += l + "\n";
  detail::write_file((dir_ / "edit_log.jsonl").string(), log_text);

  ojson objects = ojson::array();
  for (std::size_t f = 0; f < object_stats_.size(); ++f) {
    ojson fr = ojson::array();
    for (const auto& o : object_stats_[f]) {
      fr.push_back({{"centroid", vec_json(o.centroid)},
                    {"aabb_min", vec_json(o.aabb_min)},
                    {"aabb_max", vec_json(o.aabb_max)}});
    }
    objects.push_back({{"index", entries_[f].index}, {"objects", fr}});
  }
  const std::string objects_text = objects.dump(1) + "\n";
  detail::write_file((dir_ / "objects.json").string(), objects_text);

  Manifest m;
  ojson j;
  j["format"] = kManifestFormat;
  j["version"] = 1;
  j["frame_count"] = entries_.size();
  j["fps"] = fps_;
  j["particle_count"] = n_;
  j["scene_hash"] = scene_hash;
  j["config_hash"] = config_hash;
  ojson frames = ojson::array();
  for (const auto& e : entries_) {
    frames.push_back({{"index", e.index}, {"time", e.time}, {"file", e.file}, {"sha256", e.sha}});
    m.files.push_back(e.file);
  }
  j["frames"] = frames;
  if (opts_.write_conditioning) {
    ojson imgs = ojson::array();
    for (const auto& e : entries_) {
      imgs.push_back({{"index", e.index}, {"file", e.image_file}, {"sha256", e.image_sha}});
      m.files.push_back(e.image_file);
    }
    const auto& c = opts_.camera;
    j["camera"] = {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
                   {"width", c.width}, {"height", c.height}, {"splat_radius", c.splat_radius},
                   {"mode", color_mode_name(c.mode)}, {"center", vec_json(c.center)},
                   {"rotation", {vec_json(c.rotation.row(0)), vec_json(c.rotation.row(1)),
                                 vec_json(c.rotation.row(2))}}};
    j["conditioning"] = imgs;
  }
  j["edit_log"] = {{"file", "edit_log.jsonl"}, {"records", edit_log.size()}, {"sha256", sha256_hex(log_text)}};
  j["objects"] = {{"file", "objects.json"}, {"sha256", sha256_hex(objects_text)}};
  m.files.push_back("edit_log.jsonl");
  m.files.push_back("objects.json");
  m.json = j.dump(2) + "\n";
  m.frame_count = entries_.size();
  detail::write_file((dir_ / "manifest.json").string(), m.json);
  return m;
}

Manifest export_trajectory(const Trajectory& traj, const fs::path& dir, const ExportOptions& opts) {
  TrajectoryWriter w(dir, opts);
  w.begin(traj.fps, traj.object_id);
  for (const auto& f : traj.frames) w.add(f);
  return w.finish(traj.edit_log, traj.scene_hash, traj.config_hash);
}

namespace {

ojson read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  const std::string text = detail::read_file(path.string());
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kManifestFormat)
    fail(ErrorCode::FormatError, path.string() + ": not a trajectory manifest");
  return j;
}

}  // namespace

Trajectory import_trajectory(const fs::path& dir) {
  const auto j = read_manifest(dir);
  Trajectory t;
  try {
    t.fps = j.at("fps").get<double>();
    t.scene_hash = j.at("scene_hash").get<std::string>();
    t.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& f : j.at("frames")) {
      const auto file = f.at("file").get<std::string>();
      auto frame = decode_frame(detail::read_file((dir / file).string()));
      if (frame.index != f.at("index").get<std::uint64_t>())
        fail(ErrorCode::IntegrityError, file + ": frame index does not match the manifest");
      frame.time = f.at("time").get<double>();
      t.frames.push_back(std::move(frame));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, "manifest: " + std::string(e.what()));
  }
  const std::string log = detail::read_file((dir / "edit_log.jsonl").string());
  std::istringstream in(log);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) t.edit_log.push_back(line);
  }
  return t;
}

VerifyReport verify_trajectory(const fs::path& dir) {
  const auto j = read_manifest(dir);
  VerifyReport rep;
  auto check = [&](const std::string& file, const std::string& expected) {
    ++rep.files_checked;
    const auto path = dir / file;
    if (!fs::exists(path)) {
      rep.problems.push_back(file + ": missing");
      return;
    }
    const auto got = sha256_file(path);
    if (got != expected) rep.problems.push_back(file + ": sha256 " + got + " does not match manifest " + expected);
  };
  try {
    const auto n = j.at("particle_count").get<std::uint64_t>();
    const auto& frames = j.at("frames");
    if (frames.size() != j.at("frame_count").get<std::size_t>())
      rep.problems.push_back("manifest: frame_count disagrees with the frame list");
    for (const auto& f : frames) {
      const auto file = f.at("file").get<std::string>();
      check(file, f.at("sha256").get<std::string>());
      if (fs::exists(dir / file)) {
        try {
          const auto fr = decode_frame(detail::read_file((dir / file).string()));
          if (fr.particle_count() != n) rep.problems.push_back(file + ": particle count differs from manifest");
        } catch (const Error& e) {
          rep.problems.push_back(file + ": " + e.what());
        }
      }
    }
    if (j.contains("conditioning")) {
      for (const auto& f : j["conditioning"]) check(f.at("file").get<std::string>(), f.at("sha256").get<std::string>());
    }
    check(j.at("edit_log").at("file").get<std::string>(), j.at("edit_log").at("sha256").get<std::string>());
    check(j.at("objects").at("file").get<std::string>(), j.at("objects").at("sha256").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    rep.problems.push_back(std::string("manifest: ") + e.what());
  }
  rep.ok = rep.problems.empty();
  return rep;
}

}  // namespace mpmedit
