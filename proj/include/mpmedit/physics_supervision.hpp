#pragma once

// Supervision terms for predicted material fields: per-point task loss,
// wave-speed smoothness, modulus-space triplet contrast and prompt
// assignment cross-entropy, plus analytic gradients and a central-difference
// checker for each of them.

#include "mpmedit/material_field.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mpmedit {

struct SupervisionTargets {
  std::vector<std::int32_t> class_labels;          // y_cls, length N
  MatrixX params;                                  // normalized targets, N x 3
  std::vector<std::int32_t> part_labels;           // length N
  std::map<std::int32_t, std::int32_t> prompt_of_part;  // part label -> prompt index

  std::size_t size() const noexcept { return class_labels.size(); }
};

struct LossWeights {
  double reg = 1.0;
  double cls = 0.3;
  double smooth = 0.02;
  double con = 5e-4;
  double assign = 0.1;
  double margin = 0.2;
  double huber_delta = 1.0;
  int smooth_k = 8;
  double smooth_eps = 1e-8;
  bool smooth_within_part = true;
  double temperature = 0.07;

  void validate() const;
};

// Huber penalty summed over the components of r.
double huber(double r, double delta);
double huber_derivative(double r, double delta);

double task_loss(const MatrixX& pred_probs, const MatrixX& pred_params,
                 const SupervisionTargets& targets, const LossWeights& w);

struct SmoothnessResult {
  double value = 0.0;
  std::vector<std::size_t> isolated;  // points with no admissible neighbour
};

// Neighbour lists used by the smoothness surrogate, k nearest (same part when
// labels exist and smooth_within_part is set), ordered by distance then index.
std::vector<std::vector<std::size_t>> smoothness_neighbors(const MaterialField& field,
                                                           const LossWeights& w);

SmoothnessResult smoothness_loss_detailed(const MaterialField& field, const LossWeights& w);
double smoothness_loss(const MaterialField& field, const LossWeights& w);

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

// e_i = normalize([ln mu_i, ln K_i]).
Eigen::Vector2d modulus_embedding(double young, double poisson);

double contrastive_loss(const MaterialField& field, const std::vector<Triplet>& triplets,
                        const LossWeights& w);

// Uniform anchors, positive uniformly from the anchor's part (other than the
// anchor when possible), negative uniformly from the other parts.
std::vector<Triplet> sample_triplets(const MaterialField& field, std::size_t count,
                                     std::uint64_t seed);

// Mean cross-entropy of softmax(raw_logits / tau) against pi(part(i)).
double assignment_loss(const MatrixX& raw_logits, const SupervisionTargets& targets, double tau);

struct LossBreakdown {
  double task = 0.0;
  double smooth = 0.0;
  double contrastive = 0.0;
  double assignment = 0.0;
  double total = 0.0;
};

// L = task + w.smooth * smooth + w.con * contrastive + w.assign * assignment.
LossBreakdown combine_losses(double task, double smooth, double contrastive, double assignment,
                             const LossWeights& w);

struct LossInputs {
  MatrixX pred_probs;   // N x C
  MatrixX pred_params;  // N x 3, normalized
  MaterialField field;  // predicted field for smooth/contrastive terms
  std::vector<Triplet> triplets;
  MatrixX raw_logits;   // N x K assignment logits before temperature
  SupervisionTargets targets;
};

LossBreakdown total_loss(const LossInputs& in, const LossWeights& w);

// ---------------------------------------------------------------------------
// Gradients. Field gradients are N x 3 with respect to (ln E, nu, ln rho).

MatrixX smoothness_gradient(const MaterialField& field, const LossWeights& w);
MatrixX contrastive_gradient(const MaterialField& field, const std::vector<Triplet>& triplets,
                             const LossWeights& w);
MatrixX assignment_gradient(const MatrixX& raw_logits, const SupervisionTargets& targets,
                            double tau);

// Task loss with class probabilities given as softmax(class_logits).
double task_loss_from_logits(const MatrixX& class_logits, const MatrixX& pred_params,
                             const SupervisionTargets& targets, const LossWeights& w);

struct TaskGradient {
  MatrixX d_params;        // N x 3
  MatrixX d_class_logits;  // N x C
};

TaskGradient task_gradient(const MatrixX& class_logits, const MatrixX& pred_params,
                           const SupervisionTargets& targets, const LossWeights& w);

enum class LossKind { Task, Smoothness, Contrastive, Assignment };

std::string loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct GradCheckInputs {
  MaterialField field;
  std::vector<Triplet> triplets;
  MatrixX class_logits;
  MatrixX pred_params;
  MatrixX raw_logits;
  SupervisionTargets targets;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

/// Compares the analytic gradient of one loss with central differences of
/// step `epsilon` in every parameter. Throws NonSmoothPoint when the probe
/// sits on (or within a few steps of) a hinge or Huber kink.
GradCheckResult finite_diff_check(LossKind kind, const GradCheckInputs& in, const LossWeights& w,
                                  double epsilon = 1e-5);

}  // namespace mpmedit
