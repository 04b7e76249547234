#include "mpmedit/volumetric_fill.hpp"

#include "mpmedit/errors.hpp"
#include "mpmedit/spatial_index.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <queue>
#include <tuple>

namespace mpmedit {

namespace {

enum : std::uint8_t { kEmpty = 0, kSurface = 1, kExterior = 2 };
constexpr std::uint16_t kUnreached = 0xFFFF;
constexpr std::size_t kMaxVoxels = std::size_t{1} << 27;

struct VoxelGrid {
  Vec3 anchor;  // world position of voxel centre (pad, pad, pad)
  double size = 0.0;
  Eigen::Vector3i pad;
  Eigen::Vector3i dims;
  std::vector<std::uint8_t> state;

  std::size_t flat(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims.y() + y) * dims.x() + x;
  }
  Eigen::Vector3i index_of(const Vec3& p) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
      const double f = std::round((p[a] - anchor[a]) / size) + pad[a];
      c[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(dims[a] - 1)));
    }
    return c;
  }
  std::size_t total() const { return state.size(); }
};

void check_surface(const MaterialField& surface, const Vec3& extent) {
  const auto& pts = surface.positions;
  if (pts.size() < 4) {
    fail(ErrorCode::DegenerateGeometry, "surface needs at least 4 non-coplanar points");
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const auto ev = eig.eigenvalues();
  if (!(ev[0] > 1e-12 * ev[2]) || extent.minCoeff() <= 0.0) {
    fail(ErrorCode::DegenerateGeometry, "surface samples are coplanar; there is no interior");
  }
}

// Multi-source 6-connected BFS distance restricted to voxels where
// `walkable` holds, seeded from walkable voxels adjacent to a seed voxel.
template <class Walkable, class Seed>
std::vector<std::uint16_t> band_distance(const VoxelGrid& g, Walkable walkable, Seed seed) {
  std::vector<std::uint16_t> dist(g.total(), kUnreached);
  std::deque<std::size_t> queue;
  const int nx = g.dims.x(), ny = g.dims.y(), nz = g.dims.z();
  const std::ptrdiff_t strides[3] = {1, nx, static_cast<std::ptrdiff_t>(nx) * ny};
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        const std::size_t c = g.flat(x, y, z);
        if (!walkable(c)) continue;
        const int coord[3] = {x, y, z};
        bool touches = false;
        for (int a = 0; a < 3 && !touches; ++a) {
          if (coord[a] > 0 && seed(c - strides[a])) touches = true;
          if (coord[a] + 1 < g.dims[a] && seed(c + strides[a])) touches = true;
        }
        if (touches) {
          dist[c] = 1;
          queue.push_back(c);
        }
      }
    }
  }
  while (!queue.empty()) {
    const std::size_t c = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(c % nx);
    const int y = static_cast<int>((c / nx) % ny);
    const int z = static_cast<int>(c / (static_cast<std::size_t>(nx) * ny));
    const int coord[3] = {x, y, z};
    for (int a = 0; a < 3; ++a) {
      for (int s : {-1, 1}) {
        const int nc = coord[a] + s;
        if (nc < 0 || nc >= g.dims[a]) continue;
        const std::size_t n = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + s * strides[a]);
        if (!walkable(n) || dist[n] != kUnreached) continue;
        dist[n] = static_cast<std::uint16_t>(std::min<int>(dist[c] + 1, kUnreached - 1));
        queue.push_back(n);
      }
    }
  }
  return dist;
}

// Marks voxels inside the surface. Returns a mask over the voxel grid.
std::vector<std::uint8_t> flood_inside(VoxelGrid& g, const MaterialField& surface,
                                       FillReport& rep) {
  const int nx = g.dims.x(), ny = g.dims.y(), nz = g.dims.z();
  // Conservative stamp: the voxel holding each sample plus its 26 neighbours.
  for (const auto& p : surface.positions) {
    const auto c = g.index_of(p);
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = c.x() + dx, y = c.y() + dy, z = c.z() + dz;
          if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) continue;
          g.state[g.flat(x, y, z)] = kSurface;
        }
      }
    }
  }

  // Flood the exterior from every non-surface voxel on the grid boundary.
  std::deque<std::size_t> queue;
  auto seed = [&](int x, int y, int z) {
    const std::size_t c = g.flat(x, y, z);
    if (g.state[c] == kEmpty) {
      g.state[c] = kExterior;
      queue.push_back(c);
    }
  };
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        if (x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1) seed(x, y, z);
      }
    }
  }
  const std::ptrdiff_t strides[3] = {1, nx, static_cast<std::ptrdiff_t>(nx) * ny};
  while (!queue.empty()) {
    const std::size_t c = queue.front();
    queue.pop_front();
    const int coord[3] = {static_cast<int>(c % nx), static_cast<int>((c / nx) % ny),
                          static_cast<int>(c / (static_cast<std::size_t>(nx) * ny))};
    for (int a = 0; a < 3; ++a) {
      for (int s : {-1, 1}) {
        const int nc = coord[a] + s;
        if (nc < 0 || nc >= g.dims[a]) continue;
        const auto n = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + s * strides[a]);
        if (g.state[n] != kEmpty) continue;
        g.state[n] = kExterior;
        queue.push_back(n);
      }
    }
  }

  for (auto s : g.state) {
    if (s == kSurface) ++rep.surface_voxels;
    if (s == kExterior) ++rep.exterior_voxels;
    if (s == kEmpty) ++rep.interior_voxels;
  }
  const std::size_t non_surface = g.total() - rep.surface_voxels;
  if (non_surface == 0 ||
      static_cast<double>(rep.exterior_voxels) > 0.95 * static_cast<double>(non_surface)) {
    fail(ErrorCode::LeakDetected,
         "exterior flood reached " + std::to_string(rep.exterior_voxels) + " of " +
             std::to_string(non_surface) + " non-surface voxels; the surface is not closed");
  }

  // Split the stamped band between the two sides it separates: a band voxel
  // belongs to the interior when it is strictly closer to interior voxels.
  auto is_band = [&](std::size_t c) { return g.state[c] == kSurface; };
  const auto d_ext = band_distance(g, is_band, [&](std::size_t c) { return g.state[c] == kExterior; });
  const auto d_int = band_distance(g, is_band, [&](std::size_t c) { return g.state[c] == kEmpty; });
  std::vector<std::uint8_t> inside(g.total(), 0);
  for (std::size_t c = 0; c < g.total(); ++c) {
    inside[c] = g.state[c] == kEmpty || (g.state[c] == kSurface && d_int[c] < d_ext[c]);
  }
  return inside;
}

}  // namespace

std::string inside_test_name(InsideTest t) {
  return t == InsideTest::VoxelFlood ? "voxel_flood" : "winding_number";
}

InsideTest parse_inside_test(const std::string& name) {
  if (name == "voxel_flood") return InsideTest::VoxelFlood;
  if (name == "winding_number") return InsideTest::WindingNumber;
  fail(ErrorCode::ConfigError, "unknown inside test '" + name + "'");
}

void FillConfig::validate() const {
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    fail(ErrorCode::ConfigError, "fill spacing must be positive");
  if (voxel_resolution != 0 && voxel_resolution < 8)
    fail(ErrorCode::ConfigError, "voxel resolution must be >= 8 per axis");
  if (knn_k < 1) fail(ErrorCode::ConfigError, "knn_k must be >= 1");
  if (!(surface_clearance >= 0.0 && surface_clearance < 1.0))
    fail(ErrorCode::ConfigError, "surface clearance must lie in [0, 1)");
}

std::vector<Vec3> fill_interior(const MaterialField& surface, const FillConfig& cfg,
                                FillReport* report) {
  cfg.validate();
  FillReport rep;
  if (surface.positions.empty()) fail(ErrorCode::DegenerateGeometry, "empty surface");
  Vec3 lo = surface.positions.front(), hi = lo;
  for (const auto& p : surface.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  check_surface(surface, extent);

  const double h = cfg.spacing;
  Eigen::Vector3i lattice;
  for (int a = 0; a < 3; ++a) lattice[a] = static_cast<int>(std::floor(extent[a] / h + 1e-9)) + 1;
  const double lattice_count = double(lattice.x()) * lattice.y() * lattice.z();
  if (lattice_count > 5e8) fail(ErrorCode::ConfigError, "fill spacing is too fine for the surface extent");
  rep.lattice_candidates = static_cast<std::size_t>(lattice_count);

  std::vector<std::uint8_t> inside;
  VoxelGrid grid;
  std::optional<OrientedSamples> oriented;
  if (cfg.inside_test == InsideTest::VoxelFlood) {
    grid.size = cfg.voxel_resolution > 0 ? extent.maxCoeff() / cfg.voxel_resolution : 0.5 * h;
    grid.anchor = lo;
    for (int a = 0; a < 3; ++a) {
      const int core = static_cast<int>(std::ceil(extent[a] / grid.size)) + 1;
      grid.pad[a] = std::max(2, (8 - core + 1) / 2);
      grid.dims[a] = core + 2 * grid.pad[a];
    }
    const double voxels = double(grid.dims.x()) * grid.dims.y() * grid.dims.z();
    if (voxels > double(kMaxVoxels)) fail(ErrorCode::ConfigError, "voxel grid too large; raise the spacing");
    grid.state.assign(static_cast<std::size_t>(voxels), kEmpty);
    rep.voxel_size = grid.size;
    rep.voxel_dims = grid.dims;
    inside = flood_inside(grid, surface, rep);
  } else {
    oriented = estimate_oriented_samples(surface.positions);
  }

  const PointGrid surface_index(surface.positions);
  const double clearance2 = std::pow(cfg.surface_clearance * h, 2);
  std::vector<std::vector<Vec3>> slabs(static_cast<std::size_t>(lattice.z()));

#pragma omp parallel for schedule(dynamic)
  for (int kz = 0; kz < lattice.z(); ++kz) {
    auto& out = slabs[static_cast<std::size_t>(kz)];
    for (int ky = 0; ky < lattice.y(); ++ky) {
      for (int kx = 0; kx < lattice.x(); ++kx) {
        const Vec3 p = lo + Vec3(kx * h, ky * h, kz * h);
        bool in;
        if (oriented) {
          in = winding_number(*oriented, p) >= 0.5;
        } else {
          const auto c = grid.index_of(p);
          in = inside[grid.flat(c.x(), c.y(), c.z())] != 0;
        }
        if (!in) continue;
        if (surface_index.nearest(p).dist2 < clearance2) continue;
        out.push_back(p);
      }
    }
  }

  std::vector<Vec3> result;
  for (auto& s : slabs) result.insert(result.end(), s.begin(), s.end());
  rep.interior_points = result.size();
  if (report) *report = rep;
  if (result.empty()) {
    fail(ErrorCode::DegenerateGeometry,
         "no interior lattice point at spacing " + std::to_string(h) + " (object thinner than spacing?)");
  }
  return result;
}

MaterialField inherit_properties(const std::vector<Vec3>& interior, const MaterialField& surface,
                                 const FillConfig& cfg) {
  if (cfg.knn_k < 1) fail(ErrorCode::ConfigError, "knn_k must be >= 1");
  if (interior.empty()) fail(ErrorCode::ShapeError, "no interior points to inherit into");
  const auto report = validate_field(surface);
  if (!report.ok()) fail(ErrorCode::DomainError, "invalid surface field: " + report.summary());

  const std::size_t ns = surface.size();
  const std::size_t ni = interior.size();
  MaterialField out = surface;
  out.positions.insert(out.positions.end(), interior.begin(), interior.end());
  out.class_id.resize(ns + ni);
  out.young_modulus.resize(ns + ni);
  out.poisson_ratio.resize(ns + ni);
  out.density.resize(ns + ni);
  if (surface.has_part_labels()) out.part_label.resize(ns + ni);
  out.interior_flag.resize(ns + ni, 1);
  if (cfg.spacing > 0.0) out.particle_spacing = cfg.spacing;

  const PointGrid index(surface.positions);
  const auto k = static_cast<std::size_t>(cfg.knn_k);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(ni); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t dst = ns + i;
    const auto nb = index.knn(interior[i], k);
    if (k == 1 || nb.front().dist2 == 0.0) {
      const std::size_t src = nb.front().index;
      out.class_id[dst] = surface.class_id[src];
      out.young_modulus[dst] = surface.young_modulus[src];
      out.poisson_ratio[dst] = surface.poisson_ratio[src];
      out.density[dst] = surface.density[src];
      if (surface.has_part_labels()) out.part_label[dst] = surface.part_label[src];
      continue;
    }
    double wsum = 0.0, e = 0.0, nu = 0.0, rho = 0.0;
    std::map<std::int32_t, int> class_votes, part_votes;
    for (const auto& n : nb) {
      const double wgt = 1.0 / n.dist2;
      wsum += wgt;
      e += wgt * surface.young_modulus[n.index];
      nu += wgt * surface.poisson_ratio[n.index];
      rho += wgt * surface.density[n.index];
      ++class_votes[surface.class_id[n.index]];
      if (surface.has_part_labels()) ++part_votes[surface.part_label[n.index]];
    }
    auto majority = [](const std::map<std::int32_t, int>& votes) {
      auto best = votes.begin();
      for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) best = it;  // map order breaks ties low
      }
      return best->first;
    };
    out.class_id[dst] = majority(class_votes);
    out.young_modulus[dst] = e / wsum;
    out.poisson_ratio[dst] = nu / wsum;
    out.density[dst] = rho / wsum;
    if (surface.has_part_labels()) out.part_label[dst] = majority(part_votes);
  }
  return out;
}

MaterialField fill_solid(const MaterialField& surface, const FillConfig& cfg, FillReport* report) {
  const auto interior = fill_interior(surface, cfg, report);
  return inherit_properties(interior, surface, cfg);
}

OrientedSamples estimate_oriented_samples(const std::vector<Vec3>& points, int k) {
  const std::size_t n = points.size();
  if (n < 4) fail(ErrorCode::DegenerateGeometry, "need at least 4 samples for normals");
  k = std::min<int>(k, static_cast<int>(n) - 1);
  OrientedSamples s;
  s.points = points;
  s.normals.resize(n);
  s.areas.resize(n);
  const PointGrid index(points);
  std::vector<std::vector<Neighbor>> nbrs(n);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    nbrs[i] = index.knn(points[i], static_cast<std::size_t>(k), i);
    Vec3 mean = points[i];
    for (const auto& nb : nbrs[i]) mean += points[nb.index];
    mean /= static_cast<double>(nbrs[i].size() + 1);
    Mat3 cov = (points[i] - mean) * (points[i] - mean).transpose();
    for (const auto& nb : nbrs[i]) cov += (points[nb.index] - mean) * (points[nb.index] - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    s.normals[i] = eig.eigenvectors().col(0);
    // For a uniform sample density the j-th neighbour sits at r_j^2 ~ j / (pi sigma),
    // so the mean over j = 1..k gives the per-sample area 1 / sigma.
    double mean_d2 = 0.0;
    for (const auto& nb : nbrs[i]) mean_d2 += nb.dist2;
    mean_d2 /= static_cast<double>(nbrs[i].size());
    s.areas[i] = 2.0 * std::numbers::pi * mean_d2 / static_cast<double>(nbrs[i].size() + 1);
  }

  // Consistent orientation by propagating along a minimum spanning tree of
  // the kNN graph, weighting edges by 1 - |n_i . n_j|.
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& nb : nbrs[i]) {
      adj[i].push_back(nb.index);
      adj[nb.index].push_back(i);
    }
  }
  std::vector<std::uint8_t> done(n, 0);
  using Item = std::tuple<double, std::size_t, std::size_t>;  // weight, node, parent
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a].x() > points[b].x(); });
  for (std::size_t root : order) {
    if (done[root]) continue;
    if (s.normals[root].x() < 0.0) s.normals[root] = -s.normals[root];
    done[root] = 1;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    auto push_edges = [&](std::size_t u) {
      for (auto v : adj[u]) {
        if (!done[v]) pq.emplace(1.0 - std::abs(s.normals[u].dot(s.normals[v])), v, u);
      }
    };
    push_edges(root);
    while (!pq.empty()) {
      const auto [wgt, v, parent] = pq.top();
      pq.pop();
      if (done[v]) continue;
      if (s.normals[v].dot(s.normals[parent]) < 0.0) s.normals[v] = -s.normals[v];
      done[v] = 1;
      push_edges(v);
    }
  }
  return s;
}

double winding_number(const OrientedSamples& samples, const Vec3& query) {
  double w = 0.0;
  for (std::size_t i = 0; i < samples.points.size(); ++i) {
    const Vec3 d = samples.points[i] - query;
    const double r = d.norm();
    if (r <= 0.0) continue;
    w += samples.areas[i] * d.dot(samples.normals[i]) / (r * r * r);
  }
  return w / (4.0 * std::numbers::pi);
}

}  // namespace mpmedit
