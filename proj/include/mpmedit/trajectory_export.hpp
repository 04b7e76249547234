#pragma once

#include "mpmedit/material_field.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mpmedit {

struct ObjectFrameStats {
  Vec3 centroid = Vec3::Zero();
  Vec3 aabb_min = Vec3::Zero();
  Vec3 aabb_max = Vec3::Zero();
};

struct TrajectoryFrame {
  std::uint64_t index = 0;
  double time = 0.0;
  std::vector<float> positions;  // N x 3, row-major
  std::vector<ObjectFrameStats> objects;

  std::size_t particle_count() const { return positions.size() / 3; }
};

struct Trajectory {
  double fps = 24.0;
  std::vector<TrajectoryFrame> frames;
  std::vector<std::int32_t> object_id;  // per particle, for object-id rendering
  std::vector<std::string> edit_log;    // JSON lines
  std::string scene_hash;
  std::string config_hash;

  std::size_t particle_count() const { return frames.empty() ? 0 : frames.front().particle_count(); }
};

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Frame file: "MPMFRAME", u32 version, u32 reserved, u64 N, u64 frame index,
// then N x 3 float32, all little-endian.
std::string encode_frame(const TrajectoryFrame& frame);
TrajectoryFrame decode_frame(const std::string& bytes);

// ---------------------------------------------------------------------------
// Rasterization

enum class ColorMode { Depth, ObjectId };

std::string color_mode_name(ColorMode m);
ColorMode parse_color_mode(const std::string& name);

struct CameraSpec {
  double fx = 64.0, fy = 64.0, cx = 32.0, cy = 32.0;
  // World-to-camera rotation and camera centre: p_cam = R (p - center).
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();
  int width = 64, height = 64;
  int splat_radius = 1;
  ColorMode mode = ColorMode::Depth;
  std::optional<std::pair<double, double>> depth_range;  // fixed z range, else per frame

  void validate() const;
  // Camera at `eye` looking at `target` with +y up in the image pointing down
  // the world -y direction (image rows grow downward).
  static CameraSpec look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                            double fov_y_deg);
};

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;     // width * height * 3
  std::vector<float> depth;          // z of the winning point, +inf where empty
  std::vector<std::int32_t> winner;  // point index per pixel, -1 where empty
  bool empty = true;                 // no point landed in the viewport

  std::size_t occupied() const;
};

Image rasterize_frame(const std::vector<Vec3>& positions, const CameraSpec& cam,
                      const std::vector<std::int32_t>& object_id = {});

std::string encode_ppm(const Image& img);

// ---------------------------------------------------------------------------
// Export

struct ExportOptions {
  bool write_conditioning = true;
  CameraSpec camera{};
  std::string frame_prefix = "frame_";
};

struct Manifest {
  std::string json;  // the manifest text as written
  std::size_t frame_count = 0;
  std::vector<std::string> files;
};

Manifest export_trajectory(const Trajectory& traj, const std::filesystem::path& dir,
                           const ExportOptions& opts = {});

// Reads back every frame listed in the manifest.
Trajectory import_trajectory(const std::filesystem::path& dir);

struct VerifyReport {
  bool ok = true;
  std::size_t files_checked = 0;
  std::vector<std::string> problems;
};

VerifyReport verify_trajectory(const std::filesystem::path& dir);

// Streams frames to disk as they arrive. Call begin() once, add() per frame
// in order, then finish() to write the manifest.
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::filesystem::path dir, ExportOptions opts);
  void begin(double fps, std::vector<std::int32_t> object_id);
  void add(const TrajectoryFrame& frame);
  Manifest finish(const std::vector<std::string>& edit_log, const std::string& scene_hash,
                  const std::string& config_hash);

 private:
  struct Entry {
    std::string file;
    std::string sha;
    std::uint64_t index;
    double time;
    std::string image_file;
    std::string image_sha;
  };
  std::filesystem::path dir_;
  ExportOptions opts_;
  double fps_ = 0.0;
  std::size_t n_ = 0;
  std::vector<std::int32_t> object_id_;
  std::vector<Entry> entries_;
  std::vector<std::vector<ObjectFrameStats>> object_stats_;
  std::vector<double> times_;
};

// Bounded single-producer / single-consumer hand-off. push() blocks while the
// queue is full; pop() returns nullopt once closed and drained.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

  void push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
};

}  // namespace mpmedit
