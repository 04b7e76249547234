#pragma once

#include "mpmedit/material_field.hpp"

#include <vector>

namespace mpmedit {

// Samples on the six faces of an axis-aligned box, roughly `spacing` apart.
// Edge and corner samples appear once.
std::vector<Vec3> box_shell(const Vec3& lo, const Vec3& hi, double spacing);

// Fibonacci-lattice samples on a sphere with about one sample per spacing^2.
std::vector<Vec3> sphere_shell(const Vec3& center, double radius, double spacing);

// Square sheet in the z = z0 plane.
std::vector<Vec3> flat_sheet(double size, double spacing, double z0 = 0.0);

}  // namespace mpmedit
