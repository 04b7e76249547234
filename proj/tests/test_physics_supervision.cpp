#include "mpmedit/physics_supervision.hpp"
#include "mpmedit/semantic_conditioning.hpp"
#include "oracles/loss_oracles.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <numeric>

using namespace mpmedit;
using namespace oracle;
using testutil::rel_err;

TEST_CASE("default weights") {
  const LossWeights w;
  CHECK(w.reg == 1.0);
  CHECK(w.cls == 0.3);
  CHECK(w.smooth == 0.02);
  CHECK(w.con == 5e-4);
  CHECK(w.assign == 0.1);
  CHECK(w.temperature == 0.07);
  CHECK(w.huber_delta == 1.0);
  CHECK(w.smooth_k == 8);
  CHECK(w.smooth_eps == 1e-8);
  CHECK(w.margin == 0.2);
}

TEST_CASE("task loss examples") {
  const LossWeights w;
  SupervisionTargets t;
  t.class_labels = {2, 0, 5};
  t.params = MatrixX::Random(3, 3);
  MatrixX onehot = MatrixX::Zero(3, 6);
  for (int i = 0; i < 3; ++i) onehot(i, t.class_labels[i]) = 1.0;
  CHECK(task_loss(onehot, t.params, t, w) == 0.0);
  const MatrixX uniform = MatrixX::Constant(3, 6, 1.0 / 6.0);
  CHECK(std::abs(task_loss(uniform, t.params, t, w) - 0.3 * std::log(6.0)) < 1e-15);
  CHECK(std::abs(0.3 * std::log(6.0) - 0.5375) < 1e-4);

  // N=4 fixture, tests/oracles/derive_values.py
  MatrixX probs(4, 3), pred(4, 3);
  probs << 0.7, 0.2, 0.1, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5, 0.05, 0.05, 0.9;
  pred << 0.1, -0.2, 0.3, 1.5, 0.0, -0.4, -2.0, 0.5, 0.5, 0.0, 0.0, 0.0;
  SupervisionTargets t4;
  t4.class_labels = {0, 2, 2, 1};
  t4.params.resize(4, 3);
  t4.params << 0.0, 0.0, 0.0, 0.2, 0.1, -0.1, 0.5, 0.5, 0.5, 0.3, -1.6, 0.9;
  CHECK(std::abs(task_loss(probs, pred, t4, w) - 1.5112145401783954) < 1e-10);

  MatrixX bad = probs;
  bad(0, 0) = 0.9;
  CHECK(testutil::error_code_of([&] { task_loss(bad, pred, t4, w); }) == ErrorCode::DomainError);
  CHECK(testutil::error_code_of([&] { task_loss(probs, pred.topRows(3), t4, w); }) == ErrorCode::ShapeError);
}

TEST_CASE("smoothness loss examples") {
  LossWeights w;
  std::vector<Vec3> pos{Vec3::Zero(), Vec3(1, 0, 0), Vec3(0, 2, 0)};
  CHECK(smoothness_loss(MaterialField::uniform(pos, MaterialClass::Elastic, 1e6, 0.3, 1000), w) == 0.0);

  // c_s equal, c_p apart by exactly 1: (E, nu) = (2, 0) and (2.79289..., 0.39644...)
  w.smooth_k = 1;
  MaterialField f;
  f.push_back(Vec3::Zero(), 0, 2.0, 0.0, 1.0);
  f.push_back(Vec3(1, 0, 0), 0, 2.7928932188134525, 0.3964466094067262, 1.0);
  CHECK(std::abs(smoothness_loss(f, w) - 0.9999999900000002) < 1e-12);
}

TEST_CASE("smoothness scaling, translation and permutation") {
  Rng rng(21);
  LossWeights w;
  auto fx = random_fixture(rng, 40);
  const double base = smoothness_loss(fx.in.field, w);
  auto scaled = fx.in.field;
  for (auto& p : scaled.positions) p *= 2.0;
  CHECK(rel_err(smoothness_loss(scaled, w), base / 4.0) < 1e-6);

  auto moved = fx.in.field;
  for (auto& p : moved.positions) p += Vec3(0.25, -0.5, 1.0);
  CHECK(rel_err(smoothness_loss(moved, w), base) < 1e-12);

  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  MaterialField pf;
  for (auto i : perm)
    pf.push_back(fx.in.field.positions[i], fx.in.field.class_id[i], fx.in.field.young_modulus[i],
                 fx.in.field.poisson_ratio[i], fx.in.field.density[i], fx.in.field.part_label[i]);
  CHECK(rel_err(smoothness_loss(pf, w), base) < 1e-12);
}

TEST_CASE("smoothness isolated points are reported") {
  LossWeights w;
  MaterialField f;
  f.push_back(Vec3::Zero(), 0, 1e5, 0.3, 1000, 0);
  f.push_back(Vec3(1, 0, 0), 0, 2e5, 0.3, 1000, 0);
  f.push_back(Vec3(2, 0, 0), 0, 3e5, 0.3, 1000, 1);
  const auto r = smoothness_loss_detailed(f, w);
  REQUIRE(r.isolated.size() == 1);
  CHECK(r.isolated[0] == 2);
  MaterialField lonely;
  lonely.push_back(Vec3::Zero(), 0, 1e5, 0.3, 1000, 0);
  lonely.push_back(Vec3(1, 0, 0), 0, 1e5, 0.3, 1000, 1);
  CHECK(testutil::error_code_of([&] { smoothness_loss(lonely, w); }) == ErrorCode::DegenerateInput);
}

TEST_CASE("contrastive loss examples") {
  LossWeights w;
  MaterialField f;
  f.push_back(Vec3::Zero(), 0, 1e5, 0.2, 1000, 0);
  f.push_back(Vec3(1, 0, 0), 0, 1.2e5, 0.2, 1000, 0);
  f.push_back(Vec3(2, 0, 0), 0, 1e9, 0.4, 1000, 1);
  // tests/oracles/derive_values.py
  CHECK(std::abs(contrastive_loss(f, {{0, 1, 2}}, w) - 0.19941058489572305) < 1e-12);

  MaterialField same;
  for (int i = 0; i < 3; ++i) same.push_back(Vec3(i, 0, 0), 0, 1e5, 0.2, 1000, i == 2 ? 1 : 0);
  CHECK(std::abs(contrastive_loss(same, {{0, 1, 2}}, w) - w.margin) < 1e-15);

  MaterialField far;
  far.push_back(Vec3::Zero(), 0, 1e5, 0.2, 1000, 0);
  far.push_back(Vec3(1, 0, 0), 0, 1e5, 0.2, 1000, 0);
  far.push_back(Vec3(2, 0, 0), 0, 1e5, -0.44, 1000, 1);
  LossWeights small;
  small.margin = 1e-4;
  CHECK(contrastive_loss(far, {{0, 1, 2}}, small) == 0.0);

  // mu and K are non-positive only outside the valid range
  auto bad = f;
  bad.poisson_ratio[2] = 0.5;
  CHECK(testutil::error_code_of([&] { contrastive_loss(bad, {{0, 1, 2}}, w); }) == ErrorCode::DomainError);
}

TEST_CASE("contrastive scale behaviour") {
  // Pairwise embedding distances are unchanged by a common E scale only in
  // the degenerate case of one shared E; with distinct E values the
  // normalized log-moduli move, so only permutation invariance is asserted.
  LossWeights w;
  MaterialField f;
  for (int i = 0; i < 4; ++i) f.push_back(Vec3(i, 0, 0), 0, 3e5, 0.3, 1000, i < 2 ? 0 : 1);
  std::vector<Triplet> tr{{0, 1, 2}, {1, 0, 3}, {2, 3, 0}};
  const double base = contrastive_loss(f, tr, w);
  auto g = f;
  for (auto& e : g.young_modulus) e *= 37.0;
  CHECK(std::abs(contrastive_loss(g, tr, w) - base) < 1e-10);

  Rng rng(5);
  auto fx = random_fixture(rng, 30);
  const double a = contrastive_loss(fx.in.field, fx.in.triplets, w);
  auto rev = fx.in.triplets;
  std::reverse(rev.begin(), rev.end());
  CHECK(rel_err(contrastive_loss(fx.in.field, rev, w), a) < 1e-14);
}

TEST_CASE("triplet sampling respects parts and is seeded") {
  Rng rng(8);
  auto fx = random_fixture(rng, 30);
  const auto a = sample_triplets(fx.in.field, 100, 7);
  const auto b = sample_triplets(fx.in.field, 100, 7);
  REQUIRE(a.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].anchor == b[i].anchor);
    CHECK(a[i].negative == b[i].negative);
    CHECK(fx.in.field.part_label[a[i].anchor] == fx.in.field.part_label[a[i].positive]);
    CHECK(fx.in.field.part_label[a[i].anchor] != fx.in.field.part_label[a[i].negative]);
    CHECK(a[i].anchor != a[i].positive);
  }
}

TEST_CASE("assignment loss examples") {
  SupervisionTargets t;
  t.part_labels = {0, 1, 1};
  t.prompt_of_part = {{0, 0}, {1, 1}};
  MatrixX S = MatrixX::Zero(3, 4);
  CHECK(std::abs(assignment_loss(S, t, 0.07) - std::log(4.0)) < 1e-15);
  MatrixX sat = MatrixX::Zero(3, 2);
  sat(0, 0) = 20.0;
  sat(1, 1) = 20.0;
  sat(2, 1) = 20.0;
  CHECK(assignment_loss(sat, t, 1.0) < 1e-8);

  MatrixX S3(3, 2);
  S3 << 0.10, -0.05, 0.02, 0.03, -0.20, 0.15;
  // tests/oracles/derive_values.py
  CHECK(std::abs(assignment_loss(S3, t, 0.07) - 0.24730500870060435) < 1e-10);

  SupervisionTargets missing = t;
  missing.prompt_of_part.erase(1);
  CHECK(testutil::error_code_of([&] { assignment_loss(S3, missing, 0.07); }) == ErrorCode::MissingMapping);
  CHECK(testutil::error_code_of([&] { assignment_loss(S3.topRows(2), t, 0.07); }) == ErrorCode::ShapeError);
}

TEST_CASE("assignment loss falls as the true logit rises") {
  Rng rng(12);
  auto fx = random_fixture(rng, 10);
  for (int i = 0; i < 10; ++i) {
    MatrixX S = fx.in.raw_logits;
    const int k = fx.in.targets.prompt_of_part.at(fx.in.targets.part_labels[i]);
    double prev = assignment_loss(S, fx.in.targets, 0.07);
    for (int step = 0; step < 10; ++step) {
      S(i, k) += 0.01;
      const double cur = assignment_loss(S, fx.in.targets, 0.07);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("losses match scalar-loop oracles on random fixtures") {
  Rng rng(99);
  const LossWeights w;
  for (int t = 0; t < 100; ++t) {
    auto fx = random_fixture(rng, 8 + static_cast<int>(rng.below(20)));
    const auto& in = fx.in;
    CHECK(std::abs(task_loss(fx.probs, in.pred_params, in.targets, w) - task_oracle(fx.probs, in.pred_params, in.targets, w)) < 1e-10);
    CHECK(rel_err(smoothness_loss(in.field, w), smooth_oracle(in.field, w)) < 1e-10);
    CHECK(std::abs(contrastive_loss(in.field, in.triplets, w) - contrastive_oracle(in.field, in.triplets, w.margin)) < 1e-10);
    CHECK(std::abs(assignment_loss(in.raw_logits, in.targets, w.temperature) -
                   assignment_oracle(in.raw_logits, in.targets, w.temperature)) < 1e-10);
    const auto b = total_loss(loss_inputs(fx), w);
    CHECK(std::abs(b.total - (b.task + 0.02 * b.smooth + 5e-4 * b.contrastive + 0.1 * b.assignment)) < 1e-12);
    CHECK(b.task >= 0.0);
    CHECK(b.smooth >= 0.0);
    CHECK(b.contrastive >= 0.0);
    CHECK(b.assignment >= 0.0);
  }
}

TEST_CASE("total loss arithmetic") {
  const LossWeights w;
  const auto b = combine_losses(0.5, 1.0, 0.2, 0.7, w);
  CHECK(std::abs(b.total - 0.5901) < 1e-15);
  CHECK(combine_losses(0, 0, 0, 0, w).total == 0.0);

  Rng rng(4);
  auto fx = random_fixture(rng, 20);
  LossWeights only_reg;
  only_reg.cls = only_reg.smooth = only_reg.con = only_reg.assign = 0.0;
  double h = 0.0;
  for (Eigen::Index i = 0; i < 20; ++i)
    for (int c = 0; c < 3; ++c) h += huber_ref(fx.in.pred_params(i, c) - fx.in.targets.params(i, c), 1.0);
  CHECK(std::abs(total_loss(loss_inputs(fx), only_reg).total - h / 20.0) < 1e-12);
}

TEST_CASE("analytic gradients pass central differences") {
  Rng rng(2024);
  const LossWeights w;
  for (auto kind : {LossKind::Task, LossKind::Smoothness, LossKind::Contrastive, LossKind::Assignment}) {
    int probes = 0, attempts = 0;
    double worst = 0.0;
    while (probes < 20 && attempts < 200) {
      ++attempts;
      auto fx = random_fixture(rng, 12);
      try {
        const auto r = finite_diff_check(kind, fx.in, w, 1e-5);
        worst = std::max(worst, r.max_rel_error);
        CHECK(r.parameters > 0);
        ++probes;
      } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NonSmoothPoint);
      }
    }
    INFO(loss_kind_name(kind));
    CHECK(probes == 20);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradient check flags hinge points") {
  LossWeights w;
  MaterialField f;
  f.push_back(Vec3::Zero(), 0, 1e5, 0.2, 1000, 0);
  f.push_back(Vec3(1, 0, 0), 0, 1e5, 0.2, 1000, 0);
  f.push_back(Vec3(2, 0, 0), 0, 1e5, 0.2, 1000, 1);
  w.margin = 1e-12;  // hinge argument within a step of zero
  GradCheckInputs in;
  in.field = f;
  in.triplets = {{0, 1, 2}};
  CHECK(testutil::error_code_of([&] { finite_diff_check(LossKind::Contrastive, in, w, 1e-5); }) ==
        ErrorCode::NonSmoothPoint);
}

TEST_CASE("loss kind names") {
  for (auto k : {LossKind::Task, LossKind::Smoothness, LossKind::Contrastive, LossKind::Assignment})
    CHECK(parse_loss_kind(loss_kind_name(k)) == k);
}
