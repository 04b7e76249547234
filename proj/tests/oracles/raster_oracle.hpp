#pragma once

#include "mpmedit/trajectory_export.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

using mpmedit::CameraSpec;
using mpmedit::Vec3;

// Per-pixel oracle: every point is tested against every pixel.
inline std::vector<std::int32_t> brute_winners(const std::vector<Vec3>& pts, const CameraSpec& c) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(c.width) * c.height, -1);
  const int r = c.splat_radius;
  for (int py = 0; py < c.height; ++py) {
    for (int px = 0; px < c.width; ++px) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 q = c.rotation * (pts[i] - c.center);
        if (q.z() <= 1e-9) continue;
        const long ci = std::lround(std::floor(c.fx * q.x() / q.z() + c.cx + 0.5));
        const long cj = std::lround(std::floor(c.fy * q.y() / q.z() + c.cy + 0.5));
        const long dx = px - ci, dy = py - cj;
        if (dx * dx + dy * dy > r * r) continue;
        if (q.z() < best) {
          best = q.z();
          out[static_cast<std::size_t>(py) * c.width + px] = static_cast<std::int32_t>(i);
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
