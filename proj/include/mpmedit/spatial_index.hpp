#pragma once

#include "mpmedit/material_field.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mpmedit {

struct Neighbor {
  std::size_t index = 0;  // index into the point array given at construction
  double dist2 = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

// Uniform-cell bucket grid over a subset of a point array. Queries are exact:
// results are ordered by (squared distance, index), so ties resolve to the
// lowest index just like a brute-force scan.
class PointGrid {
 public:
  // Index all points.
  explicit PointGrid(std::span<const Vec3> points, double cell_size = 0.0);
  // Index only `subset` (global indices into `points`).
  PointGrid(std::span<const Vec3> points, std::vector<std::size_t> subset, double cell_size = 0.0);

  std::size_t size() const noexcept { return members_.size(); }
  double cell_size() const noexcept { return cell_; }

  // Up to k nearest indexed points, skipping global index `exclude` if given.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k,
                            std::size_t exclude = static_cast<std::size_t>(-1)) const;

  // Nearest indexed point. The grid must be non-empty.
  Neighbor nearest(const Vec3& query) const;

 private:
  void build(double cell_size);
  Eigen::Vector3i cell_of(const Vec3& p) const;
  std::size_t flat(const Eigen::Vector3i& c) const {
    return (static_cast<std::size_t>(c.z()) * dims_.y() + c.y()) * dims_.x() + c.x();
  }

  std::span<const Vec3> points_;
  std::vector<std::size_t> members_;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Ones();
  std::vector<std::size_t> cell_start_;  // CSR offsets, size = cells + 1
  std::vector<std::size_t> cell_items_;  // global indices, ascending within a cell
};

// O(N) reference scan with the same ordering contract as PointGrid.
std::vector<Neighbor> brute_force_knn(std::span<const Vec3> points, const Vec3& query,
                                      std::size_t k,
                                      std::size_t exclude = static_cast<std::size_t>(-1));

}  // namespace mpmedit
