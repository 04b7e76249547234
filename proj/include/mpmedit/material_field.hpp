#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpmedit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatrixX = Eigen::MatrixXd;

enum class MaterialClass : std::int32_t {
  Elastic = 0,
  Plasticine = 1,
  Sand = 2,
  Snow = 3,
  Liquid = 4,
  Rigid = 5,
};

inline constexpr int kMaterialClassCount = 6;

std::string_view material_class_name(MaterialClass cls);
std::optional<MaterialClass> parse_material_class(std::string_view name);
bool is_valid_class_index(std::int32_t index, int class_count = kMaterialClassCount);

// Per-class plasticity constants. Only the entries relevant to a class are
// read by the constitutive update.
struct PlasticityParams {
  double yield_stress = 1e4;            // Plasticine, von Mises (Pa)
  double friction_angle_deg = 30.0;     // Sand, Drucker-Prager
  double critical_compression = 2.5e-2; // Snow theta_c
  double critical_stretch = 7.5e-3;     // Snow theta_s
  double snow_hardening = 10.0;         // Snow xi
  double snow_min_jp = 0.6;
  double snow_max_jp = 20.0;
  double rigid_max_young = 1e9;         // Rigid stiffness clamp (Pa)

  // Throws DomainError if any constant is non-positive where required.
  void validate() const;
};

struct MaterialModel {
  MaterialClass kind = MaterialClass::Elastic;
  PlasticityParams plasticity{};
};

/// Closed-form isotropic moduli; c_p and c_s are NaN when density is unknown.
struct ElasticDerived {
  double mu = 0.0;
  double kappa = 0.0;
  double lame_lambda = 0.0;
  double c_p = 0.0;
  double c_s = 0.0;
};

struct WaveSpeeds {
  double c_p = 0.0;
  double c_s = 0.0;
};

/// Shear, bulk and first Lame parameter from (E, nu).
/// Requires E > 0 and -1 < nu < 0.5, otherwise throws DomainError.
ElasticDerived derive_moduli(double young, double poisson);

/// Longitudinal and shear wave speeds of an isotropic linear-elastic solid.
WaveSpeeds wave_speeds(double young, double poisson, double density);

/// Moduli plus wave speeds in one call.
ElasticDerived elastic_derived(double young, double poisson, double density);

// Bounds applied when decoding continuous parameters.
struct ValidityRanges {
  double young_min = 1e2;
  double young_max = 1e12;
  double poisson_min = -0.45;
  double poisson_max = 0.499;
  double density_min = 1.0;
  double density_max = 2e4;
};

// z-score constants over (log10 E, nu, log10 rho).
struct NormalizationConstants {
  std::array<double, 3> mean{6.0, 0.3, 3.0};
  std::array<double, 3> stddev{2.0, 0.1, 0.6};

  std::array<double, 3> normalize(double young, double poisson, double density) const;
  std::array<double, 3> denormalize(const std::array<double, 3>& z) const;  // -> (E, nu, rho)
};

// Column-oriented per-point material description. part_label is optional:
// an empty vector means the field carries no part labels.
struct MaterialField {
  std::vector<Vec3> positions;
  std::vector<std::int32_t> class_id;
  std::vector<double> young_modulus;
  std::vector<double> poisson_ratio;
  std::vector<double> density;
  std::vector<std::int32_t> part_label;
  std::vector<std::uint8_t> interior_flag;
  NormalizationConstants normalization{};
  double particle_spacing = 0.0;  // 0 when unknown (e.g. raw surface samples)

  std::size_t size() const noexcept { return positions.size(); }
  bool has_part_labels() const noexcept { return !part_label.empty(); }

  // Appends one point; part is ignored when the field has no labels and
  // the field is non-empty.
  void push_back(const Vec3& x, std::int32_t cls, double young, double poisson,
                 double rho, std::optional<std::int32_t> part = std::nullopt,
                 bool interior = false);

  // Uniform field: every point gets the same class and parameters.
  static MaterialField uniform(std::vector<Vec3> positions, MaterialClass cls,
                               double young, double poisson, double density);
};

struct Violation {
  std::int64_t index = -1;  // -1 for whole-array problems
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_field(const MaterialField& field,
                                int class_count = kMaterialClassCount);

/// Argmax-decode class probabilities and de-normalize continuous parameters.
/// class_probs is N x C with rows on the simplex (tolerance 1e-6), params is
/// N x 3 in normalized (log10 E, nu, log10 rho) space. Ties go to the lowest
/// class index and the decoded values are clamped into `ranges`.
MaterialField decode_material_field(const MatrixX& class_probs, const MatrixX& params,
                                    const std::vector<Vec3>& positions,
                                    const NormalizationConstants& norm = {},
                                    int class_count = kMaterialClassCount,
                                    const ValidityRanges& ranges = {});

/// Per-point normalized parameters, N x 3.
MatrixX normalized_params(const MaterialField& field);

}  // namespace mpmedit
