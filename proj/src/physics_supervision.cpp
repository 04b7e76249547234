#include "mpmedit/physics_supervision.hpp"

#include "mpmedit/errors.hpp"
#include "mpmedit/random.hpp"
#include "mpmedit/semantic_conditioning.hpp"
#include "mpmedit/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mpmedit {

namespace {

constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

void check_targets(const SupervisionTargets& t, Eigen::Index n) {
  if (static_cast<Eigen::Index>(t.class_labels.size()) != n)
    fail(ErrorCode::ShapeError, "targets.class_labels length does not match N");
  if (t.params.rows() != n || t.params.cols() != 3)
    fail(ErrorCode::ShapeError, "targets.params must be N x 3");
}

void check_simplex(const MatrixX& probs) {
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double s = probs.row(i).sum();
    if (!(std::abs(s - 1.0) <= 1e-6) || (probs.row(i).array() < 0.0).any()) {
      fail(ErrorCode::DomainError,
           "pred_probs row " + std::to_string(i) + " is not on the probability simplex");
    }
  }
}

std::int32_t prompt_for(const SupervisionTargets& t, std::size_t i, Eigen::Index k) {
  const auto label = t.part_labels[i];
  const auto it = t.prompt_of_part.find(label);
  if (it == t.prompt_of_part.end()) {
    fail(ErrorCode::MissingMapping,
         "no prompt mapping for part label " + std::to_string(label));
  }
  if (it->second < 0 || it->second >= k) {
    fail(ErrorCode::ShapeError, "prompt index " + std::to_string(it->second) +
                                    " out of range for " + std::to_string(k) + " prompts");
  }
  return it->second;
}

// Wave speeds and their derivatives with respect to (ln E, nu, ln rho).
struct WaveJet {
  double cp, cs;
  Eigen::Vector3d dcp, dcs;
};

WaveJet wave_jet(double young, double nu, double rho) {
  const WaveSpeeds w = wave_speeds(young, nu, rho);
  WaveJet j{w.c_p, w.c_s, {}, {}};
  const double dlog_cp_dnu = 0.5 * (-1.0 / (1.0 - nu) - 1.0 / (1.0 + nu) + 2.0 / (1.0 - 2.0 * nu));
  j.dcp = {0.5 * w.c_p, w.c_p * dlog_cp_dnu, -0.5 * w.c_p};
  j.dcs = {0.5 * w.c_s, -0.5 * w.c_s / (1.0 + nu), -0.5 * w.c_s};
  return j;
}

double relative_gap(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {reg, cls, smooth, con, assign}) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(ErrorCode::DomainError, "loss weights must be non-negative and finite");
  }
  if (!(margin > 0.0)) fail(ErrorCode::DomainError, "contrastive margin must be positive");
  if (!(huber_delta > 0.0)) fail(ErrorCode::DomainError, "huber delta must be positive");
  if (smooth_k < 1) fail(ErrorCode::DomainError, "smooth_k must be >= 1");
  if (!(smooth_eps > 0.0)) fail(ErrorCode::DomainError, "smooth_eps must be positive");
  if (!(temperature > 0.0)) fail(ErrorCode::DomainError, "temperature must be positive");
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_derivative(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0.0 ? delta : -delta;
}

double task_loss(const MatrixX& pred_probs, const MatrixX& pred_params,
                 const SupervisionTargets& targets, const LossWeights& w) {
  w.validate();
  const Eigen::Index n = pred_probs.rows();
  if (n < 1) fail(ErrorCode::ShapeError, "task loss needs at least one point");
  if (pred_params.rows() != n || pred_params.cols() != 3)
    fail(ErrorCode::ShapeError, "pred_params must be N x 3");
  check_targets(targets, n);
  check_simplex(pred_probs);

  std::vector<double> per_point(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = targets.class_labels[i];
    double reg = 0.0;
    for (int c = 0; c < 3; ++c) reg += huber(pred_params(i, c) - targets.params(i, c), w.huber_delta);
    const double ce = (y >= 0 && y < pred_probs.cols()) ? -std::log(pred_probs(i, y))
                                                        : std::numeric_limits<double>::quiet_NaN();
    per_point[i] = w.reg * reg + w.cls * ce;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = targets.class_labels[i];
    if (y < 0 || y >= pred_probs.cols())
      fail(ErrorCode::ShapeError, "class label " + std::to_string(y) + " out of range");
  }
  double total = 0.0;
  for (double v : per_point) total += v;
  return total / static_cast<double>(n);
}

std::vector<std::vector<std::size_t>> smoothness_neighbors(const MaterialField& field,
                                                           const LossWeights& w) {
  const std::size_t n = field.size();
  std::vector<std::vector<std::size_t>> out(n);
  const std::span<const Vec3> pts(field.positions);
  const auto k = static_cast<std::size_t>(w.smooth_k);

  auto query_all = [&](const PointGrid& grid, const std::vector<std::size_t>& members) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(members.size()); ++m) {
      const std::size_t i = members[m];
      const auto nb = grid.knn(pts[i], k, i);
      out[i].reserve(nb.size());
      for (const auto& e : nb) out[i].push_back(e.index);
    }
  };

  if (w.smooth_within_part && field.has_part_labels()) {
    std::map<std::int32_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[field.part_label[i]].push_back(i);
    for (auto& [label, members] : groups) {
      PointGrid grid(pts, members);
      query_all(grid, members);
    }
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    PointGrid grid(pts);
    query_all(grid, all);
  }
  return out;
}

SmoothnessResult smoothness_loss_detailed(const MaterialField& field, const LossWeights& w) {
  w.validate();
  const auto report = validate_field(field);
  if (!report.ok()) fail(ErrorCode::DomainError, "invalid field: " + report.summary());
  const std::size_t n = field.size();
  if (n < 2) fail(ErrorCode::DegenerateInput, "smoothness loss needs at least two points");

  std::vector<double> cp(n), cs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = wave_speeds(field.young_modulus[i], field.poisson_ratio[i], field.density[i]);
    cp[i] = s.c_p;
    cs[i] = s.c_s;
  }
  const auto nbrs = smoothness_neighbors(field, w);

  std::vector<double> per_point(n, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    if (nbrs[i].empty()) continue;
    double acc = 0.0;
    for (auto j : nbrs[i]) {
      const double d2 = (field.positions[j] - field.positions[i]).squaredNorm();
      const double dp = cp[j] - cp[i];
      const double ds = cs[j] - cs[i];
      acc += (dp * dp + ds * ds) / (d2 + w.smooth_eps);
    }
    per_point[i] = acc / static_cast<double>(nbrs[i].size());
  }

  SmoothnessResult r;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (nbrs[i].empty()) r.isolated.push_back(i);
    total += per_point[i];
  }
  if (r.isolated.size() == n) {
    fail(ErrorCode::DegenerateInput, "no point has an admissible smoothness neighbour");
  }
  r.value = total / static_cast<double>(n);
  return r;
}

double smoothness_loss(const MaterialField& field, const LossWeights& w) {
  return smoothness_loss_detailed(field, w).value;
}

MatrixX smoothness_gradient(const MaterialField& field, const LossWeights& w) {
  w.validate();
  const std::size_t n = field.size();
  if (n < 2) fail(ErrorCode::DegenerateInput, "smoothness loss needs at least two points");
  std::vector<WaveJet> jets;
  jets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    jets.push_back(wave_jet(field.young_modulus[i], field.poisson_ratio[i], field.density[i]));
  }
  const auto nbrs = smoothness_neighbors(field, w);
  std::vector<double> gcp(n, 0.0), gcs(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (nbrs[i].empty()) continue;
    const double coef = 2.0 * inv_n / static_cast<double>(nbrs[i].size());
    for (auto j : nbrs[i]) {
      const double d2 = (field.positions[j] - field.positions[i]).squaredNorm();
      const double wij = coef / (d2 + w.smooth_eps);
      const double gp = wij * (jets[j].cp - jets[i].cp);
      const double gs = wij * (jets[j].cs - jets[i].cs);
      gcp[j] += gp;
      gcp[i] -= gp;
      gcs[j] += gs;
      gcs[i] -= gs;
    }
  }
  MatrixX grad(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    grad.row(static_cast<Eigen::Index>(i)) = (gcp[i] * jets[i].dcp + gcs[i] * jets[i].dcs).transpose();
  }
  return grad;
}

Eigen::Vector2d modulus_embedding(double young, double poisson) {
  const auto m = derive_moduli(young, poisson);
  if (!(m.mu > 0.0) || !(m.kappa > 0.0))
    fail(ErrorCode::DomainError, "shear and bulk moduli must be positive");
  const Eigen::Vector2d u(std::log(m.mu), std::log(m.kappa));
  const double norm = u.norm();
  if (!(norm > 0.0)) fail(ErrorCode::DomainError, "log-modulus embedding has zero norm");
  return u / norm;
}

namespace {

void check_triplets(const MaterialField& field, const std::vector<Triplet>& triplets) {
  const std::size_t n = field.size();
  for (const auto& t : triplets) {
    if (t.anchor >= n || t.positive >= n || t.negative >= n)
      fail(ErrorCode::ShapeError, "triplet index out of range");
    if (field.has_part_labels()) {
      const auto a = field.part_label[t.anchor];
      if (field.part_label[t.positive] != a || field.part_label[t.negative] == a) {
        fail(ErrorCode::DomainError,
             "triplet (" + std::to_string(t.anchor) + "," + std::to_string(t.positive) + "," +
                 std::to_string(t.negative) + ") violates the same-part/different-part rule");
      }
    }
  }
}

}  // namespace

double contrastive_loss(const MaterialField& field, const std::vector<Triplet>& triplets,
                        const LossWeights& w) {
  w.validate();
  if (triplets.empty()) return 0.0;
  check_triplets(field, triplets);
  std::vector<double> hinge(triplets.size());
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const auto& tr = triplets[t];
    const auto ea = modulus_embedding(field.young_modulus[tr.anchor], field.poisson_ratio[tr.anchor]);
    const auto ep = modulus_embedding(field.young_modulus[tr.positive], field.poisson_ratio[tr.positive]);
    const auto en = modulus_embedding(field.young_modulus[tr.negative], field.poisson_ratio[tr.negative]);
    hinge[t] = std::max(0.0, (ea - ep).squaredNorm() - (ea - en).squaredNorm() + w.margin);
  }
  double total = 0.0;
  for (double h : hinge) total += h;
  return total / static_cast<double>(triplets.size());
}

MatrixX contrastive_gradient(const MaterialField& field, const std::vector<Triplet>& triplets,
                             const LossWeights& w) {
  w.validate();
  const auto n = static_cast<Eigen::Index>(field.size());
  MatrixX grad = MatrixX::Zero(n, 3);
  if (triplets.empty()) return grad;
  check_triplets(field, triplets);

  // d e / d theta for one point: (I - e e^T)/|u| * du/dtheta, 2 x 3.
  auto jac = [&](std::size_t i, Eigen::Vector2d& e) {
    const double young = field.young_modulus[i];
    const double nu = field.poisson_ratio[i];
    const auto m = derive_moduli(young, nu);
    const Eigen::Vector2d u(std::log(m.mu), std::log(m.kappa));
    const double norm = u.norm();
    if (!(norm > 0.0)) fail(ErrorCode::DomainError, "log-modulus embedding has zero norm");
    e = u / norm;
    Eigen::Matrix<double, 2, 3> du;
    du << 1.0, -1.0 / (1.0 + nu), 0.0,
          1.0, 2.0 / (1.0 - 2.0 * nu), 0.0;
    const Eigen::Matrix2d proj = (Eigen::Matrix2d::Identity() - e * e.transpose()) / norm;
    return Eigen::Matrix<double, 2, 3>(proj * du);
  };

  const double inv_t = 1.0 / static_cast<double>(triplets.size());
  for (const auto& tr : triplets) {
    Eigen::Vector2d ea, ep, en;
    const auto ja = jac(tr.anchor, ea);
    const auto jp = jac(tr.positive, ep);
    const auto jn = jac(tr.negative, en);
    const double h = (ea - ep).squaredNorm() - (ea - en).squaredNorm() + w.margin;
    if (h <= 0.0) continue;
    const Eigen::Vector2d ga = 2.0 * (en - ep) * inv_t;
    const Eigen::Vector2d gp = -2.0 * (ea - ep) * inv_t;
    const Eigen::Vector2d gn = 2.0 * (ea - en) * inv_t;
    grad.row(static_cast<Eigen::Index>(tr.anchor)) += (ja.transpose() * ga).transpose();
    grad.row(static_cast<Eigen::Index>(tr.positive)) += (jp.transpose() * gp).transpose();
    grad.row(static_cast<Eigen::Index>(tr.negative)) += (jn.transpose() * gn).transpose();
  }
  return grad;
}

std::vector<Triplet> sample_triplets(const MaterialField& field, std::size_t count,
                                     std::uint64_t seed) {
  if (!field.has_part_labels())
    fail(ErrorCode::DegenerateInput, "triplet sampling needs part labels");
  std::map<std::int32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < field.size(); ++i) groups[field.part_label[i]].push_back(i);
  if (groups.size() < 2)
    fail(ErrorCode::DegenerateInput, "triplet sampling needs at least two parts");

  Rng rng(seed);
  std::vector<Triplet> out;
  out.reserve(count);
  const std::size_t n = field.size();
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t a = rng.below(n);
    const auto label = field.part_label[a];
    const auto& same = groups[label];
    std::size_t p = a;
    if (same.size() > 1) {
      // Uniform over the part minus the anchor.
      std::size_t r = rng.below(same.size() - 1);
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(same.begin(), same.end(), a) - same.begin());
      if (r >= pos) ++r;
      p = same[r];
    }
    std::size_t r = rng.below(n - same.size());
    std::size_t neg = kNoIndex;
    for (const auto& [other, members] : groups) {
      if (other == label) continue;
      if (r < members.size()) {
        neg = members[r];
        break;
      }
      r -= members.size();
    }
    out.push_back({a, p, neg});
  }
  return out;
}

double assignment_loss(const MatrixX& raw_logits, const SupervisionTargets& targets, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::DomainError, "temperature must be positive");
  const Eigen::Index n = raw_logits.rows();
  const Eigen::Index k = raw_logits.cols();
  if (n < 1 || k < 1) fail(ErrorCode::ShapeError, "assignment logits must be non-empty");
  if (static_cast<Eigen::Index>(targets.part_labels.size()) != n)
    fail(ErrorCode::ShapeError, "targets.part_labels length does not match logits rows");

  std::vector<std::int32_t> target(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) target[i] = prompt_for(targets, static_cast<std::size_t>(i), k);

  std::vector<double> per_point(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = raw_logits.row(i).maxCoeff() / tau;
    double sum = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) sum += std::exp(raw_logits(i, c) / tau - m);
    per_point[i] = m + std::log(sum) - raw_logits(i, target[i]) / tau;
  }
  double total = 0.0;
  for (double v : per_point) total += v;
  return total / static_cast<double>(n);
}

MatrixX assignment_gradient(const MatrixX& raw_logits, const SupervisionTargets& targets,
                            double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::DomainError, "temperature must be positive");
  const Eigen::Index n = raw_logits.rows();
  const Eigen::Index k = raw_logits.cols();
  if (static_cast<Eigen::Index>(targets.part_labels.size()) != n)
    fail(ErrorCode::ShapeError, "targets.part_labels length does not match logits rows");
  MatrixX probs(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = raw_logits.row(i).maxCoeff() / tau;
    double sum = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      probs(i, c) = std::exp(raw_logits(i, c) / tau - m);
      sum += probs(i, c);
    }
    probs.row(i) /= sum;
    probs(i, prompt_for(targets, static_cast<std::size_t>(i), k)) -= 1.0;
  }
  return probs / (tau * static_cast<double>(n));
}

LossBreakdown combine_losses(double task, double smooth, double contrastive, double assignment,
                             const LossWeights& w) {
  LossBreakdown b;
  b.task = task;
  b.smooth = smooth;
  b.contrastive = contrastive;
  b.assignment = assignment;
  b.total = task + w.smooth * smooth + w.con * contrastive + w.assign * assignment;
  return b;
}

LossBreakdown total_loss(const LossInputs& in, const LossWeights& w) {
  const double task = task_loss(in.pred_probs, in.pred_params, in.targets, w);
  const double smooth = smoothness_loss(in.field, w);
  const double con = contrastive_loss(in.field, in.triplets, w);
  const double assign = assignment_loss(in.raw_logits, in.targets, w.temperature);
  return combine_losses(task, smooth, con, assign, w);
}

double task_loss_from_logits(const MatrixX& class_logits, const MatrixX& pred_params,
                             const SupervisionTargets& targets, const LossWeights& w) {
  w.validate();
  const Eigen::Index n = class_logits.rows();
  if (n < 1) fail(ErrorCode::ShapeError, "task loss needs at least one point");
  if (pred_params.rows() != n || pred_params.cols() != 3)
    fail(ErrorCode::ShapeError, "pred_params must be N x 3");
  check_targets(targets, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = targets.class_labels[i];
    if (y < 0 || y >= class_logits.cols())
      fail(ErrorCode::ShapeError, "class label " + std::to_string(y) + " out of range");
    const double m = class_logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < class_logits.cols(); ++c) sum += std::exp(class_logits(i, c) - m);
    const double ce = m + std::log(sum) - class_logits(i, y);
    double reg = 0.0;
    for (int c = 0; c < 3; ++c) reg += huber(pred_params(i, c) - targets.params(i, c), w.huber_delta);
    total += w.reg * reg + w.cls * ce;
  }
  return total / static_cast<double>(n);
}

TaskGradient task_gradient(const MatrixX& class_logits, const MatrixX& pred_params,
                           const SupervisionTargets& targets, const LossWeights& w) {
  w.validate();
  const Eigen::Index n = class_logits.rows();
  check_targets(targets, n);
  if (pred_params.rows() != n || pred_params.cols() != 3)
    fail(ErrorCode::ShapeError, "pred_params must be N x 3");
  const double inv_n = 1.0 / static_cast<double>(n);
  TaskGradient g;
  g.d_params.resize(n, 3);
  g.d_class_logits = row_softmax(class_logits);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      g.d_params(i, c) =
          w.reg * huber_derivative(pred_params(i, c) - targets.params(i, c), w.huber_delta) * inv_n;
    }
    g.d_class_logits(i, targets.class_labels[i]) -= 1.0;
  }
  g.d_class_logits *= w.cls * inv_n;
  return g;
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Task: return "task";
    case LossKind::Smoothness: return "smooth";
    case LossKind::Contrastive: return "contrastive";
    case LossKind::Assignment: return "assignment";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  for (auto k : {LossKind::Task, LossKind::Smoothness, LossKind::Contrastive, LossKind::Assignment}) {
    if (loss_kind_name(k) == name) return k;
  }
  fail(ErrorCode::ConfigError, "unknown loss '" + name + "'");
}

GradCheckResult finite_diff_check(LossKind kind, const GradCheckInputs& in, const LossWeights& w,
                                  double epsilon) {
  if (!(epsilon > 0.0)) fail(ErrorCode::DomainError, "finite-difference step must be positive");
  GradCheckResult res;

  auto compare = [&](const MatrixX& analytic, auto&& eval_at) {
    const double floor = std::max(1e-6 * analytic.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
      for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
        const double fd = (eval_at(i, c, +epsilon) - eval_at(i, c, -epsilon)) / (2.0 * epsilon);
        res.max_rel_error = std::max(res.max_rel_error, relative_gap(analytic(i, c), fd, floor));
        ++res.parameters;
      }
    }
  };

  // Perturbs (ln E, nu, ln rho) of one point.
  auto perturbed_field = [&](Eigen::Index i, Eigen::Index c, double h) {
    MaterialField f = in.field;
    if (c == 0) f.young_modulus[i] *= std::exp(h);
    if (c == 1) f.poisson_ratio[i] += h;
    if (c == 2) f.density[i] *= std::exp(h);
    return f;
  };

  switch (kind) {
    case LossKind::Task: {
      const Eigen::Index n = in.pred_params.rows();
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
          const double r = in.pred_params(i, c) - in.targets.params(i, c);
          if (std::abs(std::abs(r) - w.huber_delta) <= 10.0 * epsilon) {
            fail(ErrorCode::NonSmoothPoint, "probe sits on the Huber kink at point " +
                                                std::to_string(i));
          }
        }
      }
      const auto g = task_gradient(in.class_logits, in.pred_params, in.targets, w);
      compare(g.d_params, [&](Eigen::Index i, Eigen::Index c, double h) {
        MatrixX p = in.pred_params;
        p(i, c) += h;
        return task_loss_from_logits(in.class_logits, p, in.targets, w);
      });
      compare(g.d_class_logits, [&](Eigen::Index i, Eigen::Index c, double h) {
        MatrixX z = in.class_logits;
        z(i, c) += h;
        return task_loss_from_logits(z, in.pred_params, in.targets, w);
      });
      break;
    }
    case LossKind::Smoothness: {
      const auto g = smoothness_gradient(in.field, w);
      compare(g, [&](Eigen::Index i, Eigen::Index c, double h) {
        return smoothness_loss(perturbed_field(i, c, h), w);
      });
      break;
    }
    case LossKind::Contrastive: {
      for (const auto& tr : in.triplets) {
        const auto ea = modulus_embedding(in.field.young_modulus[tr.anchor], in.field.poisson_ratio[tr.anchor]);
        const auto ep = modulus_embedding(in.field.young_modulus[tr.positive], in.field.poisson_ratio[tr.positive]);
        const auto en = modulus_embedding(in.field.young_modulus[tr.negative], in.field.poisson_ratio[tr.negative]);
        const double h = (ea - ep).squaredNorm() - (ea - en).squaredNorm() + w.margin;
        if (std::abs(h) <= 100.0 * epsilon) {
          fail(ErrorCode::NonSmoothPoint, "probe sits on a hinge boundary (anchor " +
                                              std::to_string(tr.anchor) + ")");
        }
      }
      const auto g = contrastive_gradient(in.field, in.triplets, w);
      compare(g, [&](Eigen::Index i, Eigen::Index c, double h) {
        return contrastive_loss(perturbed_field(i, c, h), in.triplets, w);
      });
      break;
    }
    case LossKind::Assignment: {
      const auto g = assignment_gradient(in.raw_logits, in.targets, w.temperature);
      compare(g, [&](Eigen::Index i, Eigen::Index c, double h) {
        MatrixX s = in.raw_logits;
        s(i, c) += h;
        return assignment_loss(s, in.targets, w.temperature);
      });
      break;
    }
  }
  return res;
}

}  // namespace mpmedit
