#pragma once

#include "mpmedit/material_field.hpp"

#include <string>
#include <vector>

namespace mpmedit {

enum class InsideTest { VoxelFlood, WindingNumber };

std::string inside_test_name(InsideTest t);
InsideTest parse_inside_test(const std::string& name);

struct FillConfig {
  double spacing = 0.0;  // interior lattice spacing (m)
  InsideTest inside_test = InsideTest::VoxelFlood;
  // Voxels along the longest bounding-box axis; 0 picks spacing / 2 voxels.
  int voxel_resolution = 0;
  int knn_k = 1;
  // Minimum distance from any surface sample, as a fraction of spacing.
  double surface_clearance = 0.25;

  void validate() const;
};

struct FillReport {
  double voxel_size = 0.0;
  Eigen::Vector3i voxel_dims = Eigen::Vector3i::Zero();
  std::size_t surface_voxels = 0;
  std::size_t exterior_voxels = 0;
  std::size_t interior_voxels = 0;
  std::size_t lattice_candidates = 0;
  std::size_t interior_points = 0;
};

/// Lattice points at `cfg.spacing`, anchored at the surface bounding-box
/// minimum, that lie inside the closed region bounded by the surface samples.
std::vector<Vec3> fill_interior(const MaterialField& surface, const FillConfig& cfg,
                                FillReport* report = nullptr);

/// Surface points followed by `interior`, the latter copying properties from
/// their nearest surface sample (knn_k == 1) or blending the k nearest.
MaterialField inherit_properties(const std::vector<Vec3>& interior, const MaterialField& surface,
                                 const FillConfig& cfg);

MaterialField fill_solid(const MaterialField& surface, const FillConfig& cfg,
                         FillReport* report = nullptr);

// Generalized winding number of oriented, area-weighted point samples.
struct OrientedSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> areas;
};

OrientedSamples estimate_oriented_samples(const std::vector<Vec3>& points, int k = 10);
double winding_number(const OrientedSamples& samples, const Vec3& query);

}  // namespace mpmedit
