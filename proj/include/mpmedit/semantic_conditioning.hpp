#pragma once

// Forward kernels for injecting text-prompt semantics into a point stream:
// point-to-prompt soft assignment with a residual value update, and a
// two-stage (global token, then part tokens) cross-attention.

#include "mpmedit/material_field.hpp"

#include <cstdint>
#include <vector>

namespace mpmedit {

struct FeatureBundle {
  MatrixX point_features;  // N x d, [segmentation prior | positional]
  MatrixX global_token;    // 1 x d_t
  MatrixX part_tokens;     // K x d_t
  MatrixX point_proj;      // d x d_a
  MatrixX prompt_proj;     // d_t x d_a
  MatrixX value_proj;      // d_t x d
  double temperature = 0.07;
  int segmentation_dim = 0;  // d_S, informational

  Eigen::Index num_points() const { return point_features.rows(); }
  Eigen::Index num_prompts() const { return part_tokens.rows(); }

  // Throws ShapeError on inconsistent dimensions, DomainError if tau <= 0.
  void validate() const;
};

struct AssignmentResult {
  MatrixX raw_logits;  // (H Phi)(T Psi)^T, before temperature scaling
  MatrixX logits;      // raw_logits / tau
  MatrixX weights;     // row-softmax(logits), N x K
  MatrixX refined;     // H + weights (T W), N x d
};

struct AttentionWeights {
  int heads = 1;
  MatrixX query;   // d_q x width
  MatrixX key;     // d_ctx x width
  MatrixX value;   // d_ctx x width
  MatrixX output;  // width x d_q

  Eigen::Index width() const { return query.cols(); }
  void validate(Eigen::Index query_dim, Eigen::Index context_dim) const;
};

// Numerically stable softmax over each row.
MatrixX row_softmax(const MatrixX& logits);

AssignmentResult soft_assign(const FeatureBundle& bundle);

/// Multi-head scaled dot-product attention of `queries` over `context`
/// followed by the output projection, plus the residual `queries`.
MatrixX cross_attention(const MatrixX& queries, const MatrixX& context,
                        const AttentionWeights& weights);

struct HierarchicalStages {
  MatrixX global_stage;  // MHA(refined, t0) + refined
  MatrixX part_stage;    // MHA(global_stage, T) + global_stage
};

HierarchicalStages hierarchical_condition_stages(const AssignmentResult& result,
                                                 const MatrixX& global_token,
                                                 const MatrixX& part_tokens,
                                                 const AttentionWeights& global_stage,
                                                 const AttentionWeights& part_stage);

MatrixX hierarchical_condition(const AssignmentResult& result, const MatrixX& global_token,
                               const MatrixX& part_tokens, const AttentionWeights& global_stage,
                               const AttentionWeights& part_stage);

// ---------------------------------------------------------------------------
// Synthetic stand-ins for the pretrained encoders.

struct SyntheticDims {
  int segmentation = 96;  // d_S
  int positional = 96;    // d_P
  int text = 256;         // d_t
  int alignment = 64;     // d_a
};

// One-hot part indicators lifted to `dim` by a fixed Gaussian projection.
MatrixX segmentation_prior_features(const std::vector<std::int32_t>& part_labels, int num_parts,
                                    int dim, std::uint64_t seed);

// Random Fourier features of the coordinates, `dim` must be even.
MatrixX positional_features(const std::vector<Vec3>& positions, int dim, std::uint64_t seed);

FeatureBundle make_synthetic_bundle(const std::vector<Vec3>& positions,
                                    const std::vector<std::int32_t>& part_labels,
                                    int num_prompts, std::uint64_t seed,
                                    const SyntheticDims& dims = {}, double temperature = 0.07);

AttentionWeights random_attention_weights(Eigen::Index query_dim, Eigen::Index context_dim,
                                          Eigen::Index width, int heads, std::uint64_t seed,
                                          double scale = 1.0);

MatrixX random_gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                               double scale = 1.0);

}  // namespace mpmedit
