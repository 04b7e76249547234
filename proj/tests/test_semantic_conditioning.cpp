#include "mpmedit/semantic_conditioning.hpp"
#include "test_util.hpp"

#include <numeric>

using namespace mpmedit;
using testutil::max_abs_diff;

namespace {

// Triple-loop multi-head attention, written without Eigen products.
MatrixX naive_attention(const MatrixX& q_in, const MatrixX& ctx, const AttentionWeights& w) {
  const auto n = q_in.rows(), m = ctx.rows(), width = w.width();
  const auto hd = width / w.heads;
  auto project = [](const MatrixX& x, const MatrixX& p) {
    MatrixX out = MatrixX::Zero(x.rows(), p.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index k = 0; k < x.cols(); ++k) out(i, j) += x(i, k) * p(k, j);
    return out;
  };
  const MatrixX q = project(q_in, w.query), k = project(ctx, w.key), v = project(ctx, w.value);
  MatrixX att = MatrixX::Zero(n, width);
  for (int h = 0; h < w.heads; ++h) {
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> s(static_cast<std::size_t>(m));
      double mx = -1e300;
      for (Eigen::Index j = 0; j < m; ++j) {
        double dot = 0.0;
        for (Eigen::Index c = 0; c < hd; ++c) dot += q(i, h * hd + c) * k(j, h * hd + c);
        s[j] = dot / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (auto& x : s) z += (x = std::exp(x - mx));
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index c = 0; c < hd; ++c) att(i, h * hd + c) += s[j] / z * v(j, h * hd + c);
    }
  }
  return project(att, w.output) + q_in;
}

FeatureBundle small_bundle(Rng& rng, int n, int k, int d = 6, int dt = 5, int da = 4) {
  FeatureBundle b;
  b.point_features = testutil::random_matrix(rng, n, d);
  b.global_token = testutil::random_matrix(rng, 1, dt);
  b.part_tokens = testutil::random_matrix(rng, k, dt);
  b.point_proj = testutil::random_matrix(rng, d, da);
  b.prompt_proj = testutil::random_matrix(rng, dt, da);
  b.value_proj = testutil::random_matrix(rng, dt, d);
  b.temperature = 0.07;
  return b;
}

template <class M>
M permute_rows(const M& m, const std::vector<int>& perm) {
  M out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(perm[i]);
  return out;
}

std::vector<int> shuffled(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1)]);
  return p;
}

}  // namespace

TEST_CASE("row softmax is stable and stochastic") {
  MatrixX s(2, 3);
  s << 1000.0, 1000.0, 1000.0, -1000.0, 0.0, 1000.0;
  const auto a = row_softmax(s);
  CHECK(a(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(a(1, 2) == 1.0);
  CHECK(a.allFinite());
}

TEST_CASE("soft assignment rows are stochastic over random bundles") {
  Rng rng(1);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto b = small_bundle(rng, 1 + static_cast<int>(rng.below(8)), 1 + static_cast<int>(rng.below(5)));
    b.temperature = rng.uniform(0.01, 2.0);
    const auto r = soft_assign(b);
    for (Eigen::Index i = 0; i < r.weights.rows(); ++i) worst = std::max(worst, std::abs(r.weights.row(i).sum() - 1.0));
    CHECK(r.weights.minCoeff() >= 0.0);
    CHECK(max_abs_diff(r.weights, row_softmax(r.logits)) == 0.0);
    CHECK(max_abs_diff(r.logits, r.raw_logits / b.temperature) == 0.0);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("soft assignment identities") {
  Rng rng(2);
  auto b = small_bundle(rng, 5, 1);
  auto r = soft_assign(b);
  CHECK((r.weights.array() == 1.0).all());
  const MatrixX tw = b.part_tokens * b.value_proj;
  for (Eigen::Index i = 0; i < 5; ++i) CHECK((r.refined.row(i) - (b.point_features.row(i) + tw.row(0))).norm() == 0.0);

  b = small_bundle(rng, 5, 3);
  b.value_proj.setZero();
  r = soft_assign(b);
  CHECK((r.refined.array() == b.point_features.array()).all());
}

TEST_CASE("soft assignment 2x2 fixture against a scalar softmax script") {
  FeatureBundle b;
  b.point_features.resize(2, 2);
  b.point_features << 1.0, 0.0, 0.5, -0.4;
  b.part_tokens.resize(2, 2);
  b.part_tokens << 1.0, 2.0, -1.0, 0.5;
  b.global_token = MatrixX::Zero(1, 2);
  b.point_proj.resize(2, 1);
  b.point_proj << 1.0, 0.5;
  b.prompt_proj.resize(2, 1);
  b.prompt_proj << 0.3, -0.2;
  b.value_proj = MatrixX::Zero(2, 2);
  b.temperature = 0.07;
  const auto r = soft_assign(b);
  // tests/oracles/derive_values.py
  CHECK(std::abs(r.weights(0, 0) - 0.9864230830562556) < 1e-9);
  CHECK(std::abs(r.weights(0, 1) - 0.013576916943744365) < 1e-9);
  CHECK(std::abs(r.weights(1, 0) - 0.783420904231824) < 1e-9);
  CHECK(std::abs(r.weights(1, 1) - 0.21657909576817602) < 1e-9);
}

TEST_CASE("soft assignment shape errors") {
  Rng rng(3);
  auto b = small_bundle(rng, 4, 2);
  b.point_proj = MatrixX::Zero(3, 4);
  CHECK(testutil::error_code_of([&] { soft_assign(b); }) == ErrorCode::ShapeError);
  b = small_bundle(rng, 4, 2);
  b.temperature = 0.0;
  CHECK(testutil::error_code_of([&] { soft_assign(b); }) == ErrorCode::DomainError);
}

TEST_CASE("lower temperature sharpens the winning prompt") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    auto b = small_bundle(rng, 6, 4);
    b.temperature = 0.5;
    const auto hot = soft_assign(b);
    b.temperature = 0.2;
    const auto cold = soft_assign(b);
    for (Eigen::Index i = 0; i < 6; ++i) {
      Eigen::Index arg;
      const double mx = hot.raw_logits.row(i).maxCoeff(&arg);
      int ties = 0;
      for (Eigen::Index k = 0; k < 4; ++k) ties += hot.raw_logits(i, k) == mx;
      if (ties == 1 && hot.weights(i, arg) < 1.0) CHECK(cold.weights.row(i).maxCoeff() > hot.weights.row(i).maxCoeff());
    }
  }
}

TEST_CASE("cross attention matches a naive loop") {
  Rng rng(5);
  const MatrixX q = testutil::random_matrix(rng, 3, 6);
  const MatrixX ctx = testutil::random_matrix(rng, 2, 5);
  const auto w = random_attention_weights(6, 5, 4, 2, 99, 0.7);
  CHECK(max_abs_diff(cross_attention(q, ctx, w), naive_attention(q, ctx, w)) < 1e-9);

  for (int t = 0; t < 20; ++t) {
    const int heads = 1 + static_cast<int>(rng.below(4));
    const int width = heads * (1 + static_cast<int>(rng.below(4)));
    const MatrixX qq = testutil::random_matrix(rng, 1 + rng.below(7), 8);
    const MatrixX cc = testutil::random_matrix(rng, 1 + rng.below(5), 3);
    const auto ww = random_attention_weights(8, 3, width, heads, rng.next_u64());
    CHECK(max_abs_diff(cross_attention(qq, cc, ww), naive_attention(qq, cc, ww)) < 1e-9);
  }
}

TEST_CASE("cross attention identities") {
  Rng rng(6);
  const MatrixX q = testutil::random_matrix(rng, 4, 6);
  const MatrixX ctx = testutil::random_matrix(rng, 3, 5);
  auto w = random_attention_weights(6, 5, 4, 2, 1);
  w.value.setZero();
  CHECK((cross_attention(q, ctx, w).array() == q.array()).all());

  // one context token: every head puts weight 1 on it
  w = random_attention_weights(6, 5, 4, 2, 2);
  const MatrixX one = ctx.topRows(1);
  const MatrixX expect = q + (one * w.value).replicate(4, 1) * w.output;
  CHECK(max_abs_diff(cross_attention(q, one, w), expect) < 1e-12);

  w.heads = 3;
  CHECK(testutil::error_code_of([&] { cross_attention(q, ctx, w); }) == ErrorCode::ShapeError);
  w = random_attention_weights(6, 5, 4, 2, 2);
  CHECK(testutil::error_code_of([&] { cross_attention(ctx, ctx, w); }) == ErrorCode::ShapeError);
}

TEST_CASE("hierarchical conditioning composes global then part stage") {
  Rng rng(7);
  auto b = small_bundle(rng, 5, 3, 6, 5, 4);
  const auto r = soft_assign(b);
  auto g = random_attention_weights(6, 5, 4, 2, 10);
  auto p = random_attention_weights(6, 5, 4, 2, 11);
  const MatrixX hp = hierarchical_condition(r, b.global_token, b.part_tokens, g, p);
  const MatrixX oracle = naive_attention(naive_attention(r.refined, b.global_token, g), b.part_tokens, p);
  CHECK(max_abs_diff(hp, oracle) < 1e-9);

  const auto stages = hierarchical_condition_stages(r, b.global_token, b.part_tokens, g, p);
  CHECK(max_abs_diff(stages.part_stage, hp) == 0.0);

  p.value.setZero();
  CHECK(max_abs_diff(hierarchical_condition(r, b.global_token, b.part_tokens, g, p),
                     hierarchical_condition_stages(r, b.global_token, b.part_tokens, g, p).global_stage) == 0.0);
  g.value.setZero();
  CHECK(max_abs_diff(hierarchical_condition(r, b.global_token, b.part_tokens, g, p), r.refined) == 0.0);
}

TEST_CASE("point permutation equivariance through every stage") {
  Rng rng(8);
  auto b = small_bundle(rng, 9, 3);
  const auto perm = shuffled(9, rng);
  auto bp = b;
  bp.point_features = permute_rows(b.point_features, perm);
  const auto r = soft_assign(b), rp = soft_assign(bp);
  CHECK(max_abs_diff(rp.raw_logits, permute_rows(r.raw_logits, perm)) < 1e-12);
  CHECK(max_abs_diff(rp.weights, permute_rows(r.weights, perm)) < 1e-12);
  CHECK(max_abs_diff(rp.refined, permute_rows(r.refined, perm)) < 1e-12);
  const auto g = random_attention_weights(6, 5, 4, 2, 20), p = random_attention_weights(6, 5, 4, 2, 21);
  const auto s = hierarchical_condition_stages(r, b.global_token, b.part_tokens, g, p);
  const auto sp = hierarchical_condition_stages(rp, b.global_token, b.part_tokens, g, p);
  CHECK(max_abs_diff(sp.global_stage, permute_rows(s.global_stage, perm)) < 1e-12);
  CHECK(max_abs_diff(sp.part_stage, permute_rows(s.part_stage, perm)) < 1e-12);
}

TEST_CASE("prompt permutation permutes assignment columns") {
  Rng rng(9);
  auto b = small_bundle(rng, 7, 4);
  const auto perm = shuffled(4, rng);
  auto bp = b;
  bp.part_tokens = permute_rows(b.part_tokens, perm);
  const auto r = soft_assign(b), rp = soft_assign(bp);
  for (int k = 0; k < 4; ++k) CHECK((rp.weights.col(k) - r.weights.col(perm[k])).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(max_abs_diff(rp.refined, r.refined) < 1e-12);
}

TEST_CASE("synthetic bundles have the requested dimensions") {
  std::vector<Vec3> pos{Vec3::Zero(), Vec3::Ones(), Vec3(0.5, 0.2, 0.1)};
  const auto b = make_synthetic_bundle(pos, {0, 1, 1}, 2, 42);
  CHECK(b.point_features.rows() == 3);
  CHECK(b.point_features.cols() == 192);
  CHECK(b.part_tokens.rows() == 2);
  CHECK(b.global_token.cols() == 256);
  CHECK(b.temperature == 0.07);
  const auto again = make_synthetic_bundle(pos, {0, 1, 1}, 2, 42);
  CHECK(max_abs_diff(b.point_features, again.point_features) == 0.0);
  const auto r = soft_assign(b);
  CHECK(r.weights.rows() == 3);
}
