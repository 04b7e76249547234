#include "mpmedit/spatial_index.hpp"

#include "mpmedit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mpmedit {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);
constexpr long kMaxCellsPerAxis = 256;

// Keep the k best candidates ordered by (dist2, index).
void offer(std::vector<Neighbor>& best, std::size_t k, const Neighbor& cand) {
  if (best.size() == k && !(cand < best.back())) return;
  auto it = std::upper_bound(best.begin(), best.end(), cand);
  best.insert(it, cand);
  if (best.size() > k) best.pop_back();
}

}  // namespace

PointGrid::PointGrid(std::span<const Vec3> points, double cell_size) : points_(points) {
  members_.resize(points.size());
  std::iota(members_.begin(), members_.end(), std::size_t{0});
  build(cell_size);
}

PointGrid::PointGrid(std::span<const Vec3> points, std::vector<std::size_t> subset,
                     double cell_size)
    : points_(points), members_(std::move(subset)) {
  std::sort(members_.begin(), members_.end());
  for (auto i : members_) {
    if (i >= points_.size()) fail(ErrorCode::ShapeError, "PointGrid subset index out of range");
  }
  build(cell_size);
}

void PointGrid::build(double cell_size) {
  if (members_.empty()) {
    cell_start_.assign(2, 0);
    return;
  }
  Vec3 lo = points_[members_.front()];
  Vec3 hi = lo;
  for (auto i : members_) {
    lo = lo.cwiseMin(points_[i]);
    hi = hi.cwiseMax(points_[i]);
  }
  const Vec3 extent = (hi - lo).cwiseMax(Vec3::Constant(1e-12));
  if (!(cell_size > 0.0)) {
    // Aim for a few points per cell on average.
    const double volume = extent.x() * extent.y() * extent.z();
    const double n = static_cast<double>(members_.size());
    cell_size = std::cbrt(std::max(volume, 1e-36) / n * 4.0);
    const double max_extent = extent.maxCoeff();
    cell_size = std::max(cell_size, max_extent / kMaxCellsPerAxis);
    if (volume < 1e-30) cell_size = std::max(max_extent / 64.0, 1e-9);
  }
  cell_ = std::max(cell_size, extent.maxCoeff() / kMaxCellsPerAxis);
  origin_ = lo;
  for (int a = 0; a < 3; ++a) {
    dims_[a] = static_cast<int>(std::floor(extent[a] / cell_)) + 1;
  }
  const std::size_t cells = static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z();
  std::vector<std::size_t> counts(cells + 1, 0);
  for (auto i : members_) ++counts[flat(cell_of(points_[i])) + 1];
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  cell_start_ = counts;
  cell_items_.resize(members_.size());
  std::vector<std::size_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
  // members_ is sorted, so items within each cell stay in ascending order.
  for (auto i : members_) cell_items_[cursor[flat(cell_of(points_[i]))]++] = i;
}

Eigen::Vector3i PointGrid::cell_of(const Vec3& p) const {
  Eigen::Vector3i c;
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - origin_[a]) / cell_);
    c[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(dims_[a] - 1)));
  }
  return c;
}

std::vector<Neighbor> PointGrid::knn(const Vec3& query, std::size_t k, std::size_t exclude) const {
  std::vector<Neighbor> best;
  if (k == 0 || members_.empty()) return best;
  best.reserve(k + 1);

  // Search rings around the grid cell closest to the query. Once the k-th
  // distance is below the distance to every unclipped face of the visited
  // block, nothing outside the block can improve the result.
  const Eigen::Vector3i qc = cell_of(query);
  int max_ring = 0;
  for (int a = 0; a < 3; ++a) max_ring = std::max({max_ring, qc[a], dims_[a] - 1 - qc[a]});

  for (int r = 0; r <= max_ring; ++r) {
    for (int dz = -r; dz <= r; ++dz) {
      const int cz = qc.z() + dz;
      if (cz < 0 || cz >= dims_.z()) continue;
      for (int dy = -r; dy <= r; ++dy) {
        const int cy = qc.y() + dy;
        if (cy < 0 || cy >= dims_.y()) continue;
        const bool face = (std::abs(dz) == r || std::abs(dy) == r);
        for (int dx = -r; dx <= r; dx += (face ? 1 : std::max(1, 2 * r))) {
          const int cx = qc.x() + dx;
          if (cx < 0 || cx >= dims_.x()) continue;
          const std::size_t cell = flat(Eigen::Vector3i(cx, cy, cz));
          for (std::size_t s = cell_start_[cell]; s < cell_start_[cell + 1]; ++s) {
            const std::size_t idx = cell_items_[s];
            if (idx == exclude) continue;
            offer(best, k, {idx, (points_[idx] - query).squaredNorm()});
          }
        }
      }
    }
    if (best.size() == k) {
      double bound = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        if (qc[a] - r > 0) bound = std::min(bound, query[a] - (origin_[a] + (qc[a] - r) * cell_));
        if (qc[a] + r < dims_[a] - 1) bound = std::min(bound, origin_[a] + (qc[a] + r + 1) * cell_ - query[a]);
      }
      if (bound == std::numeric_limits<double>::infinity()) break;
      if (bound > 0.0 && best.back().dist2 < bound * bound) break;
    }
  }
  return best;
}

Neighbor PointGrid::nearest(const Vec3& query) const {
  auto res = knn(query, 1);
  if (res.empty()) fail(ErrorCode::DegenerateInput, "nearest-neighbour query on an empty index");
  return res.front();
}

std::vector<Neighbor> brute_force_knn(std::span<const Vec3> points, const Vec3& query,
                                      std::size_t k, std::size_t exclude) {
  std::vector<Neighbor> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == exclude) continue;
    all.push_back({i, (points[i] - query).squaredNorm()});
  }
  const std::size_t m = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end());
  all.resize(m);
  return all;
}

}  // namespace mpmedit
