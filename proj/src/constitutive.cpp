#include "mpmedit/constitutive.hpp"

#include "mpmedit/errors.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mpmedit {

RotationSvd rotation_svd(const Mat3& F) {
  if (!F.allFinite()) fail(ErrorCode::NumericalError, "non-finite deformation gradient");
  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  RotationSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (out.U.determinant() < 0.0) {
    out.U.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  if (out.V.determinant() < 0.0) {
    out.V.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  if (!out.U.allFinite() || !out.V.allFinite() || !out.sigma.allFinite())
    fail(ErrorCode::NumericalError, "SVD of deformation gradient failed");
  return out;
}

Mat3 polar_rotation(const Mat3& F) {
  const auto s = rotation_svd(F);
  return s.U * s.V.transpose();
}

EffectiveLame effective_lame(const PlasticState& state, const MaterialModel& model, double young,
                             double poisson) {
  double e = young;
  if (model.kind == MaterialClass::Rigid) e = std::min(e, model.plasticity.rigid_max_young);
  EffectiveLame l;
  l.mu = e / (2.0 * (1.0 + poisson));
  l.lambda = e * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  switch (model.kind) {
    case MaterialClass::Liquid:
      l.lambda = e / (3.0 * (1.0 - 2.0 * poisson));  // bulk modulus
      l.mu = 0.0;
      break;
    case MaterialClass::Snow: {
      const double hard = std::exp(model.plasticity.snow_hardening * (1.0 - state.Jp));
      l.mu *= hard;
      l.lambda *= hard;
      break;
    }
    default:
      break;
  }
  return l;
}

double effective_wave_speed(const PlasticState& state, const MaterialModel& model, double young,
                            double poisson, double density) {
  const auto l = effective_lame(state, model, young, poisson);
  return std::sqrt(std::max(0.0, l.lambda + 2.0 * l.mu) / density);
}

namespace {

Mat3 compose(const RotationSvd& s, const Vec3& sigma) {
  return s.U * sigma.asDiagonal() * s.V.transpose();
}

Mat3 corotated(const Mat3& F, double mu, double lambda) {
  const auto s = rotation_svd(F);
  const Mat3 R = s.U * s.V.transpose();
  const double J = s.sigma.prod();
  // J F^{-T} is the cofactor matrix, which avoids inverting F.
  Mat3 cof;
  cof.col(0) = F.col(1).cross(F.col(2));
  cof.col(1) = F.col(2).cross(F.col(0));
  cof.col(2) = F.col(0).cross(F.col(1));
  return 2.0 * mu * (F - R) + lambda * (J - 1.0) * cof;
}

// St. Venant-Kirchhoff on Hencky strain, used by the granular class.
Mat3 hencky_stress(const Mat3& F, double mu, double lambda) {
  const auto s = rotation_svd(F);
  const Vec3 eps = s.sigma.array().log();
  const double tr = eps.sum();
  Vec3 d;
  for (int i = 0; i < 3; ++i) d[i] = (2.0 * mu * eps[i] + lambda * tr) / s.sigma[i];
  return compose(s, d);
}

}  // namespace

Mat3 project_plasticity(const Mat3& F, PlasticState& state, const MaterialModel& model,
                        double young, double poisson) {
  const auto& pp = model.plasticity;
  switch (model.kind) {
    case MaterialClass::Elastic:
    case MaterialClass::Rigid:
      return F;
    case MaterialClass::Liquid: {
      const double J = F.determinant();
      if (!(J > 0.0) || !std::isfinite(J)) fail(ErrorCode::NumericalError, "liquid volume ratio not positive");
      return Mat3::Identity() * std::cbrt(J);
    }
    case MaterialClass::Snow: {
      const auto s = rotation_svd(F);
      Vec3 c;
      for (int i = 0; i < 3; ++i)
        c[i] = std::clamp(s.sigma[i], 1.0 - pp.critical_compression, 1.0 + pp.critical_stretch);
      const double jp = state.Jp * s.sigma.prod() / c.prod();
      state.Jp = std::clamp(jp, pp.snow_min_jp, pp.snow_max_jp);
      return compose(s, c);
    }
    case MaterialClass::Plasticine: {
      const auto s = rotation_svd(F);
      if (s.sigma.minCoeff() <= 0.0) fail(ErrorCode::NumericalError, "inverted plasticine particle");
      const double mu = young / (2.0 * (1.0 + poisson));
      const Vec3 eps = s.sigma.array().log();
      const Vec3 dev = eps.array() - eps.sum() / 3.0;
      const double norm = dev.norm();
      const double limit = std::sqrt(2.0 / 3.0) * pp.yield_stress / (2.0 * mu);
      if (norm <= limit) return F;
      const Vec3 h = eps - (norm - limit) / norm * dev;
      return compose(s, h.array().exp());
    }
    case MaterialClass::Sand: {
      const auto s = rotation_svd(F);
      if (s.sigma.minCoeff() <= 0.0) fail(ErrorCode::NumericalError, "inverted sand particle");
      const double mu = young / (2.0 * (1.0 + poisson));
      const double lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
      const double sin_phi = std::sin(pp.friction_angle_deg * std::numbers::pi / 180.0);
      const double alpha = std::sqrt(2.0 / 3.0) * 2.0 * sin_phi / (3.0 - sin_phi);
      const Vec3 eps = s.sigma.array().log();
      const double tr = eps.sum();
      if (tr >= 0.0) return s.U * s.V.transpose();  // tension: no cohesion
      const Vec3 dev = eps.array() - tr / 3.0;
      const double norm = dev.norm();
      const double dgamma = norm + (3.0 * lambda + 2.0 * mu) / (2.0 * mu) * tr * alpha;
      if (dgamma <= 0.0 || norm == 0.0) return F;
      const Vec3 h = eps - dgamma / norm * dev;
      return compose(s, h.array().exp());
    }
  }
  return F;
}

Mat3 first_piola(const Mat3& F, const PlasticState& state, const MaterialModel& model,
                 double young, double poisson) {
  const auto l = effective_lame(state, model, young, poisson);
  if (model.kind == MaterialClass::Sand) return hencky_stress(F, l.mu, l.lambda);
  return corotated(F, l.mu, l.lambda);
}

StressResult constitutive_stress(const Mat3& F, PlasticState state, const MaterialModel& model,
                                 double young, double poisson) {
  const double J = F.determinant();
  if (!(J > 0.0)) fail(ErrorCode::NumericalError, "deformation gradient must have det F > 0");
  StressResult r;
  r.F = project_plasticity(F, state, model, young, poisson);
  r.state = state;
  r.P = first_piola(r.F, state, model, young, poisson);
  return r;
}

}  // namespace mpmedit
