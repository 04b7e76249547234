#include "mpmedit/semantic_conditioning.hpp"

#include "mpmedit/errors.hpp"
#include "mpmedit/random.hpp"

#include <cmath>
#include <string>

namespace mpmedit {

namespace {

std::string dims(const MatrixX& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const MatrixX& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    fail(ErrorCode::ShapeError, std::string(name) + " is " + dims(m) + ", expected " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

void FeatureBundle::validate() const {
  const auto n = point_features.rows();
  const auto d = point_features.cols();
  const auto k = part_tokens.rows();
  const auto dt = part_tokens.cols();
  if (n < 1 || d < 1) fail(ErrorCode::ShapeError, "point features must be non-empty");
  if (k < 1) fail(ErrorCode::ShapeError, "at least one part prompt is required");
  if (global_token.size() != 0) expect_shape(global_token, 1, dt, "global token");
  if (point_proj.rows() != d) fail(ErrorCode::ShapeError, "point projection rows must equal d");
  const auto da = point_proj.cols();
  expect_shape(prompt_proj, dt, da, "prompt projection");
  expect_shape(value_proj, dt, d, "value projection");
  if (segmentation_dim < 0 || segmentation_dim > d)
    fail(ErrorCode::ShapeError, "segmentation_dim exceeds feature width");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    fail(ErrorCode::DomainError, "temperature must be positive");
}

void AttentionWeights::validate(Eigen::Index query_dim, Eigen::Index context_dim) const {
  if (heads < 1) fail(ErrorCode::ShapeError, "head count must be >= 1");
  const auto w = query.cols();
  if (w < 1 || w % heads != 0) {
    fail(ErrorCode::ShapeError, "attention width " + std::to_string(w) +
                                    " is not divisible by head count " + std::to_string(heads));
  }
  expect_shape(query, query_dim, w, "query projection");
  expect_shape(key, context_dim, w, "key projection");
  expect_shape(value, context_dim, w, "value projection");
  expect_shape(output, w, query_dim, "output projection");
}

MatrixX row_softmax(const MatrixX& logits) {
  MatrixX out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - m);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

AssignmentResult soft_assign(const FeatureBundle& bundle) {
  bundle.validate();
  AssignmentResult r;
  const MatrixX point_aligned = bundle.point_features * bundle.point_proj;
  const MatrixX prompt_aligned = bundle.part_tokens * bundle.prompt_proj;
  r.raw_logits = point_aligned * prompt_aligned.transpose();
  r.logits = r.raw_logits / bundle.temperature;
  r.weights = row_softmax(r.logits);
  r.refined = bundle.point_features + r.weights * (bundle.part_tokens * bundle.value_proj);
  return r;
}

MatrixX cross_attention(const MatrixX& queries, const MatrixX& context,
                        const AttentionWeights& weights) {
  if (context.rows() < 1) fail(ErrorCode::ShapeError, "attention context must be non-empty");
  weights.validate(queries.cols(), context.cols());

  const Eigen::Index width = weights.width();
  const Eigen::Index head_dim = width / weights.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const MatrixX q = queries * weights.query;
  const MatrixX k = context * weights.key;
  const MatrixX v = context * weights.value;

  MatrixX attended(queries.rows(), width);
  for (int h = 0; h < weights.heads; ++h) {
    const Eigen::Index c0 = h * head_dim;
    const MatrixX scores =
        (q.middleCols(c0, head_dim) * k.middleCols(c0, head_dim).transpose()) * scale;
    attended.middleCols(c0, head_dim) = row_softmax(scores) * v.middleCols(c0, head_dim);
  }
  return attended * weights.output + queries;
}

HierarchicalStages hierarchical_condition_stages(const AssignmentResult& result,
                                                 const MatrixX& global_token,
                                                 const MatrixX& part_tokens,
                                                 const AttentionWeights& global_stage,
                                                 const AttentionWeights& part_stage) {
  if (global_token.rows() != 1)
    fail(ErrorCode::ShapeError, "global token must be a single row, got " + dims(global_token));
  HierarchicalStages s;
  s.global_stage = cross_attention(result.refined, global_token, global_stage);
  s.part_stage = cross_attention(s.global_stage, part_tokens, part_stage);
  return s;
}

MatrixX hierarchical_condition(const AssignmentResult& result, const MatrixX& global_token,
                               const MatrixX& part_tokens, const AttentionWeights& global_stage,
                               const AttentionWeights& part_stage) {
  return hierarchical_condition_stages(result, global_token, part_tokens, global_stage,
                                       part_stage)
      .part_stage;
}

MatrixX random_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                               double scale) {
  Rng rng(seed);
  MatrixX m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

MatrixX segmentation_prior_features(const std::vector<std::int32_t>& part_labels, int num_parts,
                                    int dim, std::uint64_t seed) {
  if (num_parts < 1 || dim < 1) fail(ErrorCode::ShapeError, "need num_parts >= 1 and dim >= 1");
  const MatrixX lift = random_gaussian_matrix(num_parts, dim, seed, 1.0 / std::sqrt(double(dim)));
  MatrixX out(static_cast<Eigen::Index>(part_labels.size()), dim);
  for (std::size_t i = 0; i < part_labels.size(); ++i) {
    const auto label = part_labels[i];
    if (label < 0 || label >= num_parts)
      fail(ErrorCode::ShapeError, "part label " + std::to_string(label) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = lift.row(label);
  }
  return out;
}

MatrixX positional_features(const std::vector<Vec3>& positions, int dim, std::uint64_t seed) {
  if (dim < 2 || dim % 2 != 0) fail(ErrorCode::ShapeError, "positional dim must be even");
  const int half = dim / 2;
  const MatrixX freq = random_gaussian_matrix(3, half, seed, 2.0);
  MatrixX out(static_cast<Eigen::Index>(positions.size()), dim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (int f = 0; f < half; ++f) {
      const double phase = positions[i].dot(freq.col(f));
      out(static_cast<Eigen::Index>(i), f) = std::sin(phase);
      out(static_cast<Eigen::Index>(i), half + f) = std::cos(phase);
    }
  }
  return out;
}

FeatureBundle make_synthetic_bundle(const std::vector<Vec3>& positions,
                                    const std::vector<std::int32_t>& part_labels,
                                    int num_prompts, std::uint64_t seed,
                                    const SyntheticDims& dims, double temperature) {
  if (part_labels.size() != positions.size())
    fail(ErrorCode::ShapeError, "part_labels must match positions");
  FeatureBundle b;
  const MatrixX seg = segmentation_prior_features(part_labels, num_prompts, dims.segmentation,
                                                  seed ^ 0x5e6a11ULL);
  const MatrixX pos = positional_features(positions, dims.positional, seed ^ 0x9051ULL);
  const int d = dims.segmentation + dims.positional;
  b.point_features.resize(seg.rows(), d);
  b.point_features << seg, pos;
  b.segmentation_dim = dims.segmentation;
  b.global_token = random_gaussian_matrix(1, dims.text, seed + 1);
  b.part_tokens = random_gaussian_matrix(num_prompts, dims.text, seed + 2);
  b.point_proj = random_gaussian_matrix(d, dims.alignment, seed + 3, 1.0 / std::sqrt(double(d)));
  b.prompt_proj =
      random_gaussian_matrix(dims.text, dims.alignment, seed + 4, 1.0 / std::sqrt(double(dims.text)));
  b.value_proj = random_gaussian_matrix(dims.text, d, seed + 5, 1.0 / std::sqrt(double(dims.text)));
  b.temperature = temperature;
  return b;
}

AttentionWeights random_attention_weights(Eigen::Index query_dim, Eigen::Index context_dim,
                                          Eigen::Index width, int heads, std::uint64_t seed,
                                          double scale) {
  AttentionWeights w;
  w.heads = heads;
  w.query = random_gaussian_matrix(query_dim, width, seed + 11, scale / std::sqrt(double(query_dim)));
  w.key = random_gaussian_matrix(context_dim, width, seed + 12, scale / std::sqrt(double(context_dim)));
  w.value = random_gaussian_matrix(context_dim, width, seed + 13, scale / std::sqrt(double(context_dim)));
  w.output = random_gaussian_matrix(width, query_dim, seed + 14, scale / std::sqrt(double(width)));
  return w;
}

}  // namespace mpmedit
