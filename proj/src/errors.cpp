#include "mpmedit/errors.hpp"

namespace mpmedit {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NonSmoothPoint: return "NonSmoothPoint";
    case ErrorCode::MissingMapping: return "MissingMapping";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::LeakDetected: return "LeakDetected";
    case ErrorCode::GridOverflow: return "GridOverflow";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::ParticleEscape: return "ParticleEscape";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::ClampViolation: return "ClampViolation";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mpmedit
