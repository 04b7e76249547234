#pragma once

// Stress laws for the six material classes. Stress is returned as the first
// Piola-Kirchhoff tensor P(F); plastic classes first project F back onto
// their elastic region.

#include "mpmedit/material_field.hpp"

namespace mpmedit {

struct PlasticState {
  double Jp = 1.0;  // snow plastic volume ratio; 1 for every other class
};

struct RotationSvd {
  Mat3 U;
  Vec3 sigma;  // descending, last entry may be negative only if det F < 0
  Mat3 V;
};

// F = U diag(sigma) V^T with det U = det V = 1. Throws NumericalError on
// non-finite input.
RotationSvd rotation_svd(const Mat3& F);
Mat3 polar_rotation(const Mat3& F);

// Return mapping. Updates `state` and returns the elastic part of F.
Mat3 project_plasticity(const Mat3& F, PlasticState& state, const MaterialModel& model,
                        double young, double poisson);

Mat3 first_piola(const Mat3& F, const PlasticState& state, const MaterialModel& model,
                 double young, double poisson);

struct StressResult {
  Mat3 P;
  Mat3 F;  // F after projection
  PlasticState state;
};

// Projection followed by stress evaluation. Requires det F > 0.
StressResult constitutive_stress(const Mat3& F, PlasticState state, const MaterialModel& model,
                                 double young, double poisson);

// Effective (mu, lambda) after class-specific adjustments (rigid clamp,
// liquid shear removal, snow hardening).
struct EffectiveLame {
  double mu = 0.0;
  double lambda = 0.0;
};
EffectiveLame effective_lame(const PlasticState& state, const MaterialModel& model, double young,
                             double poisson);

// Longitudinal wave speed used for the time-step bound, consistent with
// effective_lame.
double effective_wave_speed(const PlasticState& state, const MaterialModel& model, double young,
                            double poisson, double density);

}  // namespace mpmedit
