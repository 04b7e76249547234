#pragma once

// Scalar-loop reference implementations of the supervision losses and a
// random fixture generator, shared by the unit tests and the acceptance run.

#include "mpmedit/physics_supervision.hpp"
#include "mpmedit/random.hpp"
#include "mpmedit/semantic_conditioning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace oracle {

using namespace mpmedit;

inline MatrixX uniform_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  MatrixX m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline double huber_ref(double r, double d) { return std::abs(r) <= d ? 0.5 * r * r : d * (std::abs(r) - 0.5 * d); }

inline double task_oracle(const MatrixX& probs, const MatrixX& pred, const SupervisionTargets& t, const LossWeights& w) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    double h = 0.0;
    for (int c = 0; c < 3; ++c) h += huber_ref(pred(i, c) - t.params(i, c), w.huber_delta);
    s += w.reg * h - w.cls * std::log(probs(i, t.class_labels[i]));
  }
  return s / static_cast<double>(pred.rows());
}

inline double smooth_oracle(const MaterialField& f, const LossWeights& w) {
  const std::size_t n = f.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (w.smooth_within_part && f.has_part_labels() && f.part_label[j] != f.part_label[i]) continue;
      cand.push_back({(f.positions[j] - f.positions[i]).squaredNorm(), j});
    }
    std::sort(cand.begin(), cand.end());
    const std::size_t k = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(w.smooth_k));
    if (k == 0) continue;
    const double mui = f.young_modulus[i] / (2 * (1 + f.poisson_ratio[i]));
    const double lami = f.young_modulus[i] * f.poisson_ratio[i] / ((1 + f.poisson_ratio[i]) * (1 - 2 * f.poisson_ratio[i]));
    const double cpi = std::sqrt((lami + 2 * mui) / f.density[i]), csi = std::sqrt(mui / f.density[i]);
    double acc = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
      const auto j = cand[m].second;
      const double muj = f.young_modulus[j] / (2 * (1 + f.poisson_ratio[j]));
      const double lamj = f.young_modulus[j] * f.poisson_ratio[j] / ((1 + f.poisson_ratio[j]) * (1 - 2 * f.poisson_ratio[j]));
      const double cpj = std::sqrt((lamj + 2 * muj) / f.density[j]), csj = std::sqrt(muj / f.density[j]);
      acc += ((cpj - cpi) * (cpj - cpi) + (csj - csi) * (csj - csi)) / (cand[m].first + w.smooth_eps);
    }
    total += acc / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

inline std::array<double, 2> embed(double E, double nu) {
  const double mu = E / (2 * (1 + nu)), K = E / (3 * (1 - 2 * nu));
  const double a = std::log(mu), b = std::log(K), n = std::sqrt(a * a + b * b);
  return {a / n, b / n};
}

inline double contrastive_oracle(const MaterialField& f, const std::vector<Triplet>& tr, double margin) {
  double s = 0.0;
  for (const auto& t : tr) {
    const auto a = embed(f.young_modulus[t.anchor], f.poisson_ratio[t.anchor]);
    const auto p = embed(f.young_modulus[t.positive], f.poisson_ratio[t.positive]);
    const auto q = embed(f.young_modulus[t.negative], f.poisson_ratio[t.negative]);
    const double dap = (a[0] - p[0]) * (a[0] - p[0]) + (a[1] - p[1]) * (a[1] - p[1]);
    const double daq = (a[0] - q[0]) * (a[0] - q[0]) + (a[1] - q[1]) * (a[1] - q[1]);
    s += std::max(0.0, dap - daq + margin);
  }
  return s / static_cast<double>(tr.size());
}

inline double assignment_oracle(const MatrixX& S, const SupervisionTargets& t, double tau) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    double mx = -1e300;
    for (Eigen::Index k = 0; k < S.cols(); ++k) mx = std::max(mx, S(i, k) / tau);
    double z = 0.0;
    for (Eigen::Index k = 0; k < S.cols(); ++k) z += std::exp(S(i, k) / tau - mx);
    const int target = t.prompt_of_part.at(t.part_labels[i]);
    s -= S(i, target) / tau - mx - std::log(z);
  }
  return s / static_cast<double>(S.rows());
}

struct Fixture {
  GradCheckInputs in;
  MatrixX probs;
};

inline Fixture random_fixture(Rng& rng, int n, int parts = 3, int prompts = 4, int classes = 6) {
  Fixture fx;
  auto& in = fx.in;
  for (int i = 0; i < n; ++i) {
    const auto part = static_cast<std::int32_t>(i % parts);
    in.field.push_back(Vec3(rng.uniform(), rng.uniform(), rng.uniform()), static_cast<std::int32_t>(rng.below(classes)),
                       std::pow(10.0, rng.uniform(3.0, 8.0)), rng.uniform(0.05, 0.45), rng.uniform(200.0, 3000.0), part);
  }
  in.class_logits = uniform_matrix(rng, n, classes, -2, 2);
  fx.probs = row_softmax(in.class_logits);
  in.pred_params = uniform_matrix(rng, n, 3, -1.5, 1.5);
  in.raw_logits = uniform_matrix(rng, n, prompts, -0.3, 0.3);
  in.targets.params = uniform_matrix(rng, n, 3, -1.5, 1.5);
  for (int i = 0; i < n; ++i) {
    in.targets.class_labels.push_back(static_cast<std::int32_t>(rng.below(classes)));
    in.targets.part_labels.push_back(in.field.part_label[i]);
  }
  for (int p = 0; p < parts; ++p) in.targets.prompt_of_part[p] = static_cast<std::int32_t>(rng.below(prompts));
  in.triplets = sample_triplets(in.field, 12, rng.next_u64());
  return fx;
}

inline LossInputs loss_inputs(const Fixture& fx) {
  LossInputs li;
  li.pred_probs = fx.probs;
  li.pred_params = fx.in.pred_params;
  li.field = fx.in.field;
  li.triplets = fx.in.triplets;
  li.raw_logits = fx.in.raw_logits;
  li.targets = fx.in.targets;
  return li;
}

}  // namespace oracle
