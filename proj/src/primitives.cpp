#include "mpmedit/primitives.hpp"

#include "mpmedit/errors.hpp"

#include <cmath>
#include <numbers>

namespace mpmedit {

std::vector<Vec3> box_shell(const Vec3& lo, const Vec3& hi, double spacing) {
  if (!(spacing > 0.0)) fail(ErrorCode::DomainError, "box_shell spacing must be positive");
  const Vec3 ext = hi - lo;
  if ((ext.array() <= 0.0).any()) fail(ErrorCode::DomainError, "box_shell needs hi > lo");
  Eigen::Vector3i n;
  for (int a = 0; a < 3; ++a) n[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / spacing - 1e-9)));
  std::vector<Vec3> out;
  for (int k = 0; k <= n.z(); ++k) {
    for (int j = 0; j <= n.y(); ++j) {
      for (int i = 0; i <= n.x(); ++i) {
        const bool on_face = i == 0 || j == 0 || k == 0 || i == n.x() || j == n.y() || k == n.z();
        if (!on_face) continue;
        out.emplace_back(lo.x() + ext.x() * i / n.x(), lo.y() + ext.y() * j / n.y(),
                         lo.z() + ext.z() * k / n.z());
      }
    }
  }
  return out;
}

std::vector<Vec3> sphere_shell(const Vec3& center, double radius, double spacing) {
  if (!(spacing > 0.0) || !(radius > 0.0))
    fail(ErrorCode::DomainError, "sphere_shell needs positive radius and spacing");
  const auto count = static_cast<std::size_t>(
      std::max(8.0, std::ceil(4.0 * std::numbers::pi * radius * radius / (spacing * spacing))));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * static_cast<double>(i);
    out.push_back(center + radius * Vec3(r * std::cos(phi), y, r * std::sin(phi)));
  }
  return out;
}

std::vector<Vec3> flat_sheet(double size, double spacing, double z0) {
  if (!(spacing > 0.0) || !(size > 0.0)) fail(ErrorCode::DomainError, "flat_sheet needs positive size");
  const int n = std::max(1, static_cast<int>(std::ceil(size / spacing)));
  std::vector<Vec3> out;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) out.emplace_back(size * i / n, size * j / n, z0);
  return out;
}

}  // namespace mpmedit
