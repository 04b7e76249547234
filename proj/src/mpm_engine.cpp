#include "mpmedit/mpm_engine.hpp"

#include "mpmedit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mpmedit {

std::string boundary_kind_name(BoundaryKind b) {
  switch (b) {
    case BoundaryKind::Sticky: return "sticky";
    case BoundaryKind::Slip: return "slip";
    case BoundaryKind::Separate: return "separate";
  }
  return "?";
}

BoundaryKind parse_boundary_kind(const std::string& name) {
  if (name == "sticky") return BoundaryKind::Sticky;
  if (name == "slip") return BoundaryKind::Slip;
  if (name == "separate") return BoundaryKind::Separate;
  fail(ErrorCode::ConfigError, "unknown boundary kind '" + name + "'");
}

void SimConfig::validate() const {
  if (!(h_grid > 0.0) || !std::isfinite(h_grid)) fail(ErrorCode::ConfigError, "h_grid must be positive");
  if (!(cfl > 0.0 && cfl < 1.0)) fail(ErrorCode::ConfigError, "cfl number must lie in (0, 1)");
  if (!(fps > 0.0) || !std::isfinite(fps)) fail(ErrorCode::ConfigError, "fps must be positive");
  if (frames < 1) fail(ErrorCode::ConfigError, "frames must be >= 1");
  if (!(damping >= 0.0)) fail(ErrorCode::ConfigError, "damping must be >= 0");
  if (!(max_dt >= 0.0)) fail(ErrorCode::ConfigError, "max_dt must be >= 0");
  if (!domain_min.allFinite() || !domain_max.allFinite())
    fail(ErrorCode::ConfigError, "domain bounds must be finite");
  for (int a = 0; a < 3; ++a) {
    if (domain_max[a] - domain_min[a] < 2.0 * (kMargin + 1) * h_grid)
      fail(ErrorCode::ConfigError, "domain is smaller than the boundary margins");
  }
  if (!gravity.allFinite() || !wind.allFinite()) fail(ErrorCode::ConfigError, "non-finite force field");
  plasticity.validate();
}

double SimConfig::ground_y() const {
  return ground_height.value_or(domain_min.y() + kMargin * h_grid);
}

double SimulationState::total_mass() const {
  double m = 0.0;
  for (double mi : mass) m += mi;
  return m;
}

Vec3 SimulationState::total_momentum() const {
  Vec3 p = Vec3::Zero();
  for (std::size_t i = 0; i < size(); ++i) p += mass[i] * v[i];
  return p;
}

Vec3 SimulationState::center_of_mass(std::size_t object) const {
  const auto& o = objects.at(object);
  Vec3 s = Vec3::Zero();
  double m = 0.0;
  for (std::size_t i = o.begin; i < o.end; ++i) {
    s += mass[i] * x[i];
    m += mass[i];
  }
  return s / m;
}

SimulationState build_state(const std::vector<ObjectSpec>& objects, const SimConfig& cfg) {
  cfg.validate();
  std::size_t total = 0;
  for (const auto& o : objects) total += o.field.size();
  if (objects.empty() || total == 0) fail(ErrorCode::EmptyScene, "scene has no particles");

  SimulationState s;
  s.grid.origin = cfg.domain_min;
  s.grid.h = cfg.h_grid;
  for (int a = 0; a < 3; ++a) {
    s.grid.dims[a] =
        static_cast<int>(std::ceil((cfg.domain_max[a] - cfg.domain_min[a]) / cfg.h_grid - 1e-9)) + 1;
  }
  if (static_cast<double>(s.grid.dims.x()) * s.grid.dims.y() * s.grid.dims.z() > double(1 << 27))
    fail(ErrorCode::GridOverflow, "grid has more than 2^27 nodes; raise h_grid or shrink the domain");
  s.gravity = cfg.gravity;
  s.wind = cfg.wind;
  s.plasticity = cfg.plasticity;

  const double h = cfg.h_grid;
  const Vec3 lo = s.grid.origin + Vec3::Constant(SimConfig::kMargin * h);
  const Vec3 hi = s.grid.origin + (s.grid.dims.cast<double>() - Vec3::Constant(1.0 + SimConfig::kMargin)) * h;

  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const auto& spec = objects[oi];
    const auto& f = spec.field;
    const auto rep = validate_field(f);
    if (!rep.ok()) fail(ErrorCode::DomainError, "object " + std::to_string(oi) + ": " + rep.summary());
    if (!(f.particle_spacing > 0.0))
      fail(ErrorCode::ConfigError, "object " + std::to_string(oi) + " has no particle spacing (fill it first)");
    const double vol = std::pow(f.particle_spacing, 3);
    ObjectInfo info;
    info.name = spec.name.empty() ? "object" + std::to_string(oi) : spec.name;
    info.begin = s.size();
    info.kinematic = spec.kinematic;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec3 p = spec.rotation * f.positions[i] + spec.translation;
      if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) {
        std::ostringstream msg;
        msg << "object " << oi << " particle " << i << " at (" << p.x() << ", " << p.y() << ", " << p.z()
            << ") lies outside the grid interior";
        fail(ErrorCode::GridOverflow, msg.str());
      }
      s.x.push_back(p);
      s.v.push_back(spec.velocity);
      s.F.push_back(Mat3::Identity());
      s.C.push_back(Mat3::Zero());
      s.plastic.push_back({});
      s.volume.push_back(vol);
      s.mass.push_back(f.density[i] * vol);
      s.object_id.push_back(static_cast<std::int32_t>(oi));
      s.part_label.push_back(f.has_part_labels() ? f.part_label[i] : -1);
      s.interior.push_back(f.interior_flag.empty() ? 0 : f.interior_flag[i]);
      s.cls.push_back(static_cast<MaterialClass>(f.class_id[i]));
      s.young.push_back(f.young_modulus[i]);
      s.poisson.push_back(f.poisson_ratio[i]);
      s.density.push_back(f.density[i]);
    }
    info.end = s.size();
    s.objects.push_back(info);
  }
  return s;
}

double stable_dt(const SimulationState& state, const SimConfig& cfg) {
  double cmax = 0.0, vmax = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    vmax = std::max(vmax, state.v[i].norm());
    if (state.objects[static_cast<std::size_t>(state.object_id[i])].kinematic) continue;
    cmax = std::max(cmax, effective_wave_speed(state.plastic[i], state.model_of(i), state.young[i],
                                               state.poisson[i], state.density[i]));
  }
  const double cap = cfg.max_dt > 0.0 ? cfg.max_dt : 1.0 / cfg.fps;
  const double denom = cmax + vmax;
  if (!(denom > 0.0)) return cap;
  return std::min(cfg.cfl * cfg.h_grid / denom, cap);
}

namespace {

constexpr std::int32_t kNone = -1;

// Dense lookup tables sized to the grid, kept between substeps. Entries are
// reset to kNone after every use.
struct Scratch {
  std::vector<std::int32_t> cell_bin;
  std::vector<std::int32_t> node_slot;

  void ensure(std::size_t nodes) {
    if (cell_bin.size() != nodes) {
      cell_bin.assign(nodes, kNone);
      node_slot.assign(nodes, kNone);
    }
  }
};

thread_local Scratch tls_scratch;

struct ParticleTransfer {
  Eigen::Vector3i base;
  Vec3 fx;  // position relative to base, in cells
  std::array<Vec3, 3> w;  // w[o][axis]
  Vec3 mv;
  Mat3 affine;
};

void apply_boundary(BoundaryKind kind, const Vec3& n, Vec3& v) {
  const double vn = v.dot(n);
  switch (kind) {
    case BoundaryKind::Sticky:
      v.setZero();
      break;
    case BoundaryKind::Slip:
      v -= vn * n;
      break;
    case BoundaryKind::Separate:
      if (vn < 0.0) v -= vn * n;
      break;
  }
}

}  // namespace

void step(SimulationState& s, const SimConfig& cfg, double dt) {
  const std::size_t n = s.size();
  if (n == 0) fail(ErrorCode::EmptyScene, "no particles to step");
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::NumericalError, "time step must be positive");
  const auto& g = s.grid;
  const double h = g.h;
  const double inv_h = 1.0 / h;
  const double dwdx_scale = 4.0 * inv_h * inv_h;
  auto& scratch = tls_scratch;
  scratch.ensure(g.node_count());

  std::vector<ParticleTransfer> tr(n);
  std::vector<std::uint8_t> bad(n, 0);  // 1 = escaped, 2 = numerical
  std::vector<std::uint8_t> kinematic(n, 0);
  for (std::size_t p = 0; p < n; ++p)
    kinematic[p] = s.objects[static_cast<std::size_t>(s.object_id[p])].kinematic;

  std::vector<Vec3> obj_accel(s.objects.size());
  for (std::size_t o = 0; o < s.objects.size(); ++o) {
    obj_accel[o] = s.objects[o].gravity.value_or(s.gravity) + s.objects[o].wind.value_or(s.wind);
  }

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(n); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    auto& t = tr[p];
    const Vec3 xr = (s.x[p] - g.origin) * inv_h;
    for (int a = 0; a < 3; ++a) {
      t.base[a] = static_cast<int>(std::floor(xr[a] - 0.5));
      if (!std::isfinite(xr[a]) || t.base[a] < 0 || t.base[a] + 2 >= g.dims[a]) bad[p] = 1;
    }
    if (bad[p]) {
      t.base.setZero();
      continue;
    }
    t.fx = xr - t.base.cast<double>();
    for (int a = 0; a < 3; ++a) {
      const double f = t.fx[a];
      t.w[0][a] = 0.5 * (1.5 - f) * (1.5 - f);
      t.w[1][a] = 0.75 - (f - 1.0) * (f - 1.0);
      t.w[2][a] = 0.5 * (f - 0.5) * (f - 0.5);
    }
    const auto obj = static_cast<std::size_t>(s.object_id[p]);
    if (kinematic[p]) {
      t.mv = s.v[p];
      t.affine.setZero();
      continue;
    }
    try {
      const Mat3 P = first_piola(s.F[p], s.plastic[p], s.model_of(p), s.young[p], s.poisson[p]);
      t.affine = -dt * s.volume[p] * dwdx_scale * P * s.F[p].transpose() + s.mass[p] * s.C[p];
      t.mv = s.mass[p] * (s.v[p] + dt * obj_accel[obj]);
      if (!t.affine.allFinite() || !t.mv.allFinite()) bad[p] = 2;
    } catch (const Error&) {
      bad[p] = 2;
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (!bad[p]) continue;
    std::ostringstream msg;
    msg << "particle " << p << " (object " << s.object_id[p] << ") at t=" << s.t;
    if (bad[p] == 1) {
      msg << " left the grid at (" << s.x[p].x() << ", " << s.x[p].y() << ", " << s.x[p].z() << ")";
      fail(ErrorCode::ParticleEscape, msg.str());
    }
    msg << " has a non-finite stress or momentum";
    fail(ErrorCode::NumericalError, msg.str());
  }

  // Bin particles by base cell; within a bin particles stay in index order.
  std::vector<std::uint64_t> keyed(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& b = tr[p].base;
    keyed[p] = (static_cast<std::uint64_t>(g.flat(b.x(), b.y(), b.z())) << 32) | p;
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> bin_cell, bin_start, order(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cell = keyed[i] >> 32;
    order[i] = keyed[i] & 0xFFFFFFFFu;
    if (bin_cell.empty() || bin_cell.back() != cell) {
      bin_cell.push_back(cell);
      bin_start.push_back(i);
    }
  }
  bin_start.push_back(n);
  for (std::size_t b = 0; b < bin_cell.size(); ++b) scratch.cell_bin[bin_cell[b]] = static_cast<std::int32_t>(b);

  // Active nodes: every node within reach of an occupied cell.
  std::vector<std::size_t> nodes;
  nodes.reserve(bin_cell.size() * 27);
  const std::size_t sx = 1, sy = static_cast<std::size_t>(g.dims.x()),
                    sz = static_cast<std::size_t>(g.dims.x()) * g.dims.y();
  for (std::size_t cell : bin_cell) {
    for (std::size_t oz = 0; oz < 3; ++oz)
      for (std::size_t oy = 0; oy < 3; ++oy)
        for (std::size_t ox = 0; ox < 3; ++ox) nodes.push_back(cell + ox * sx + oy * sy + oz * sz);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  for (std::size_t i = 0; i < nodes.size(); ++i) scratch.node_slot[nodes[i]] = static_cast<std::int32_t>(i);

  const double ground = cfg.ground_y();
  const double damp = std::exp(-cfg.damping * dt);
  std::vector<Vec3> grid_v(nodes.size());

  // Gather: each node sums its 27 source cells in a fixed order.
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t ni = 0; ni < static_cast<std::ptrdiff_t>(nodes.size()); ++ni) {
    const std::size_t node = nodes[static_cast<std::size_t>(ni)];
    const int ix = static_cast<int>(node % sy);
    const int iy = static_cast<int>((node / sy) % static_cast<std::size_t>(g.dims.y()));
    const int iz = static_cast<int>(node / sz);
    double m = 0.0;
    Vec3 mom = Vec3::Zero();
    bool kin = false;
    Vec3 kin_v = Vec3::Zero();
    for (int oz = 0; oz < 3; ++oz) {
      const int bz = iz - oz;
      if (bz < 0) continue;
      for (int oy = 0; oy < 3; ++oy) {
        const int by = iy - oy;
        if (by < 0) continue;
        for (int ox = 0; ox < 3; ++ox) {
          const int bx = ix - ox;
          if (bx < 0) continue;
          const std::int32_t bin = scratch.cell_bin[g.flat(bx, by, bz)];
          if (bin == kNone) continue;
          const Vec3 off(ox, oy, oz);
          for (std::size_t k = bin_start[static_cast<std::size_t>(bin)];
               k < bin_start[static_cast<std::size_t>(bin) + 1]; ++k) {
            const std::size_t p = order[k];
            const auto& t = tr[p];
            if (kinematic[p]) {
              kin = true;
              kin_v = t.mv;
              continue;
            }
            const double w = t.w[ox][0] * t.w[oy][1] * t.w[oz][2];
            const Vec3 dpos = (off - t.fx) * h;
            m += w * s.mass[p];
            mom += w * (t.mv + t.affine * dpos);
          }
        }
      }
    }
    Vec3 v = Vec3::Zero();
    if (kin) {
      v = kin_v;
    } else if (m > 0.0) {
      v = mom / m * damp;
      const int idx[3] = {ix, iy, iz};
      for (int a = 0; a < 3; ++a) {
        if (idx[a] < SimConfig::kMargin) apply_boundary(cfg.walls[2 * a], Vec3::Unit(a), v);
        if (idx[a] > g.dims[a] - 1 - SimConfig::kMargin)
          apply_boundary(cfg.walls[2 * a + 1], -Vec3::Unit(a), v);
      }
      if (g.origin.y() + iy * h <= ground) apply_boundary(cfg.ground, Vec3::UnitY(), v);
    }
    grid_v[static_cast<std::size_t>(ni)] = v;
  }

  // Grid to particles.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(n); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const auto& t = tr[p];
    if (kinematic[p]) {
      s.x[p] += dt * s.v[p];
      continue;
    }
    Vec3 nv = Vec3::Zero();
    Mat3 B = Mat3::Zero();
    for (int oz = 0; oz < 3; ++oz) {
      for (int oy = 0; oy < 3; ++oy) {
        for (int ox = 0; ox < 3; ++ox) {
          const std::size_t node = g.flat(t.base.x() + ox, t.base.y() + oy, t.base.z() + oz);
          const Vec3& vi = grid_v[static_cast<std::size_t>(scratch.node_slot[node])];
          const double w = t.w[ox][0] * t.w[oy][1] * t.w[oz][2];
          const Vec3 dpos = (Vec3(ox, oy, oz) - t.fx) * h;
          nv += w * vi;
          B += w * vi * dpos.transpose();
        }
      }
    }
    const Mat3 C = dwdx_scale * B;
    try {
      Mat3 F = (Mat3::Identity() + dt * C) * s.F[p];
      F = project_plasticity(F, s.plastic[p], s.model_of(p), s.young[p], s.poisson[p]);
      s.F[p] = F;
    } catch (const Error&) {
      bad[p] = 2;
    }
    s.v[p] = nv;
    s.C[p] = C;
    s.x[p] += dt * nv;
    if (!s.x[p].allFinite() || !nv.allFinite() || !s.F[p].allFinite()) bad[p] = 2;
  }

  for (std::size_t cell : bin_cell) scratch.cell_bin[cell] = kNone;
  for (std::size_t node : nodes) scratch.node_slot[node] = kNone;

  for (std::size_t p = 0; p < n; ++p) {
    if (bad[p]) {
      std::ostringstream msg;
      msg << "particle " << p << " (object " << s.object_id[p] << ") became non-finite at t=" << s.t;
      fail(ErrorCode::NumericalError, msg.str());
    }
  }
  s.t += dt;
  ++s.substeps;
}

std::vector<ObjectAggregate> object_aggregates(const SimulationState& s, const SimConfig& cfg) {
  std::vector<ObjectAggregate> out(s.objects.size());
  const double ground = cfg.ground_y();
  for (std::size_t o = 0; o < s.objects.size(); ++o) {
    const auto& info = s.objects[o];
    auto& a = out[o];
    if (info.size() == 0) continue;
    a.min_height = std::numeric_limits<double>::infinity();
    a.aabb_min = Vec3::Constant(std::numeric_limits<double>::infinity());
    a.aabb_max = -a.aabb_min;
    for (std::size_t i = info.begin; i < info.end; ++i) {
      a.min_height = std::min(a.min_height, s.x[i].y());
      a.max_speed = std::max(a.max_speed, s.v[i].norm());
      a.centroid += s.x[i];
      a.aabb_min = a.aabb_min.cwiseMin(s.x[i]);
      a.aabb_max = a.aabb_max.cwiseMax(s.x[i]);
    }
    a.centroid /= static_cast<double>(info.size());
    // within the quadratic stencil of a ground node
    a.ground_contact = a.min_height - ground < 1.5 * s.grid.h;
  }
  return out;
}

}  // namespace mpmedit
