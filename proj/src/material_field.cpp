#include "mpmedit/material_field.hpp"

#include "mpmedit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mpmedit {

namespace {

constexpr std::array<std::string_view, kMaterialClassCount> kClassNames = {
    "elastic", "plasticine", "sand", "snow", "liquid", "rigid"};

void check_elastic_domain(double young, double poisson) {
  if (!(young > 0.0) || !std::isfinite(young)) {
    std::ostringstream os;
    os << "Young's modulus must be positive and finite, got " << young;
    fail(ErrorCode::DomainError, os.str());
  }
  if (!(poisson > -1.0 && poisson < 0.5)) {
    std::ostringstream os;
    os << "Poisson ratio must lie in (-1, 0.5), got " << poisson;
    fail(ErrorCode::DomainError, os.str());
  }
}

}  // namespace

std::string_view material_class_name(MaterialClass cls) {
  const auto i = static_cast<std::size_t>(cls);
  return i < kClassNames.size() ? kClassNames[i] : std::string_view{"unknown"};
}

std::optional<MaterialClass> parse_material_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<MaterialClass>(i);
  }
  return std::nullopt;
}

bool is_valid_class_index(std::int32_t index, int class_count) {
  return index >= 0 && index < class_count;
}

void PlasticityParams::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
      fail(ErrorCode::DomainError, std::string("plasticity parameter '") + what +
                                       "' must be positive");
  };
  positive(yield_stress, "yield_stress");
  positive(friction_angle_deg, "friction_angle_deg");
  positive(critical_compression, "critical_compression");
  positive(critical_stretch, "critical_stretch");
  positive(rigid_max_young, "rigid_max_young");
  positive(snow_min_jp, "snow_min_jp");
  positive(snow_max_jp, "snow_max_jp");
  if (!(snow_hardening >= 0.0))
    fail(ErrorCode::DomainError, "plasticity parameter 'snow_hardening' must be >= 0");
  if (friction_angle_deg >= 90.0)
    fail(ErrorCode::DomainError, "friction angle must be below 90 degrees");
  if (critical_compression >= 1.0)
    fail(ErrorCode::DomainError, "critical compression must be below 1");
}

ElasticDerived derive_moduli(double young, double poisson) {
  check_elastic_domain(young, poisson);
  ElasticDerived d;
  d.mu = young / (2.0 * (1.0 + poisson));
  d.kappa = young / (3.0 * (1.0 - 2.0 * poisson));
  d.lame_lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  d.c_p = std::numeric_limits<double>::quiet_NaN();
  d.c_s = std::numeric_limits<double>::quiet_NaN();
  return d;
}

WaveSpeeds wave_speeds(double young, double poisson, double density) {
  check_elastic_domain(young, poisson);
  if (!(density > 0.0) || !std::isfinite(density)) {
    std::ostringstream os;
    os << "density must be positive and finite, got " << density;
    fail(ErrorCode::DomainError, os.str());
  }
  WaveSpeeds w;
  w.c_p = std::sqrt(young * (1.0 - poisson) /
                    (density * (1.0 + poisson) * (1.0 - 2.0 * poisson)));
  w.c_s = std::sqrt(young / (2.0 * density * (1.0 + poisson)));
  return w;
}

ElasticDerived elastic_derived(double young, double poisson, double density) {
  ElasticDerived d = derive_moduli(young, poisson);
  const WaveSpeeds w = wave_speeds(young, poisson, density);
  d.c_p = w.c_p;
  d.c_s = w.c_s;
  return d;
}

std::array<double, 3> NormalizationConstants::normalize(double young, double poisson,
                                                        double density) const {
  const std::array<double, 3> raw{std::log10(young), poisson, std::log10(density)};
  std::array<double, 3> z{};
  for (int k = 0; k < 3; ++k) z[k] = (raw[k] - mean[k]) / stddev[k];
  return z;
}

std::array<double, 3> NormalizationConstants::denormalize(const std::array<double, 3>& z) const {
  const double log_e = z[0] * stddev[0] + mean[0];
  const double nu = z[1] * stddev[1] + mean[1];
  const double log_rho = z[2] * stddev[2] + mean[2];
  return {std::pow(10.0, log_e), nu, std::pow(10.0, log_rho)};
}

void MaterialField::push_back(const Vec3& x, std::int32_t cls, double young, double poisson,
                              double rho, std::optional<std::int32_t> part, bool interior) {
  const bool labelled = part.has_value() && (has_part_labels() || positions.empty());
  positions.push_back(x);
  class_id.push_back(cls);
  young_modulus.push_back(young);
  poisson_ratio.push_back(poisson);
  density.push_back(rho);
  if (labelled) part_label.push_back(*part);
  interior_flag.push_back(interior ? 1 : 0);
}

MaterialField MaterialField::uniform(std::vector<Vec3> pts, MaterialClass cls, double young,
                                     double poisson, double rho) {
  MaterialField f;
  const std::size_t n = pts.size();
  f.positions = std::move(pts);
  f.class_id.assign(n, static_cast<std::int32_t>(cls));
  f.young_modulus.assign(n, young);
  f.poisson_ratio.assign(n, poisson);
  f.density.assign(n, rho);
  f.interior_flag.assign(n, 0);
  return f;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  if (violations.empty()) return "valid";
  os << violations.size() << " violation(s)";
  const std::size_t shown = std::min<std::size_t>(violations.size(), 5);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& v = violations[i];
    os << "; " << v.field;
    if (v.index >= 0) os << "[" << v.index << "]";
    os << ": " << v.message;
  }
  return os.str();
}

ValidationReport validate_field(const MaterialField& field, int class_count) {
  ValidationReport report;
  auto add = [&](std::int64_t i, const char* name, std::string msg) {
    report.violations.push_back({i, name, std::move(msg)});
  };

  const std::size_t n = field.positions.size();
  if (n == 0) add(-1, "positions", "field must contain at least one point");

  auto check_len = [&](std::size_t len, const char* name) {
    if (len != n) {
      std::ostringstream os;
      os << "length " << len << " does not match point count " << n;
      add(-1, name, os.str());
      return false;
    }
    return true;
  };
  const bool cls_ok = check_len(field.class_id.size(), "class_id");
  const bool e_ok = check_len(field.young_modulus.size(), "young_modulus");
  const bool nu_ok = check_len(field.poisson_ratio.size(), "poisson_ratio");
  const bool rho_ok = check_len(field.density.size(), "density");
  check_len(field.interior_flag.size(), "interior_flag");
  if (field.has_part_labels()) check_len(field.part_label.size(), "part_label");

  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::int64_t>(i);
    if (!field.positions[i].allFinite()) add(idx, "positions", "non-finite coordinate");
    if (cls_ok && !is_valid_class_index(field.class_id[i], class_count)) {
      add(idx, "class_id", "class index " + std::to_string(field.class_id[i]) + " out of range");
    }
    if (e_ok && !(field.young_modulus[i] > 0.0 && std::isfinite(field.young_modulus[i]))) {
      add(idx, "young_modulus", "must be positive, got " + std::to_string(field.young_modulus[i]));
    }
    if (nu_ok && !(field.poisson_ratio[i] > -1.0 && field.poisson_ratio[i] < 0.5)) {
      add(idx, "poisson_ratio",
          "must lie in (-1, 0.5), got " + std::to_string(field.poisson_ratio[i]));
    }
    if (rho_ok && !(field.density[i] > 0.0 && std::isfinite(field.density[i]))) {
      add(idx, "density", "must be positive, got " + std::to_string(field.density[i]));
    }
  }
  for (int k = 0; k < 3; ++k) {
    if (!(field.normalization.stddev[k] > 0.0))
      add(-1, "normalization", "standard deviations must be positive");
  }
  return report;
}

MaterialField decode_material_field(const MatrixX& class_probs, const MatrixX& params,
                                    const std::vector<Vec3>& positions,
                                    const NormalizationConstants& norm, int class_count,
                                    const ValidityRanges& ranges) {
  const auto n = class_probs.rows();
  if (class_probs.cols() != class_count) {
    fail(ErrorCode::ShapeError, "class_probs has " + std::to_string(class_probs.cols()) +
                                    " columns, expected " + std::to_string(class_count));
  }
  if (params.rows() != n || params.cols() != 3) {
    fail(ErrorCode::ShapeError, "params must be " + std::to_string(n) + " x 3");
  }
  if (!positions.empty() && static_cast<Eigen::Index>(positions.size()) != n) {
    fail(ErrorCode::ShapeError, "positions length does not match class_probs rows");
  }
  if (n == 0) fail(ErrorCode::ShapeError, "decode requires at least one point");

  MaterialField field;
  field.normalization = norm;
  field.positions = positions.empty() ? std::vector<Vec3>(n, Vec3::Zero()) : positions;
  field.class_id.resize(n);
  field.young_modulus.resize(n);
  field.poisson_ratio.resize(n);
  field.density.resize(n);
  field.interior_flag.assign(n, 0);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double row_sum = class_probs.row(i).sum();
    if (!(std::abs(row_sum - 1.0) <= 1e-6) || (class_probs.row(i).array() < 0.0).any()) {
      fail(ErrorCode::DomainError,
           "class_probs row " + std::to_string(i) + " is not on the probability simplex");
    }
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < class_count; ++c) {
      if (class_probs(i, c) > class_probs(i, best)) best = c;
    }
    field.class_id[i] = static_cast<std::int32_t>(best);

    if (!params.row(i).allFinite())
      fail(ErrorCode::DomainError, "params row " + std::to_string(i) + " is not finite");
    const auto raw = norm.denormalize({params(i, 0), params(i, 1), params(i, 2)});
    field.young_modulus[i] = std::clamp(raw[0], ranges.young_min, ranges.young_max);
    field.poisson_ratio[i] = std::clamp(raw[1], ranges.poisson_min, ranges.poisson_max);
    field.density[i] = std::clamp(raw[2], ranges.density_min, ranges.density_max);
  }
  return field;
}

MatrixX normalized_params(const MaterialField& field) {
  const auto n = static_cast<Eigen::Index>(field.size());
  MatrixX out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto z = field.normalization.normalize(field.young_modulus[i], field.poisson_ratio[i],
                                                 field.density[i]);
    out.row(i) << z[0], z[1], z[2];
  }
  return out;
}

}  // namespace mpmedit
