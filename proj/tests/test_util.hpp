#pragma once

#include "mpmedit/errors.hpp"
#include "mpmedit/material_field.hpp"
#include "mpmedit/random.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

namespace testutil {

inline double rel_err(double a, double b) {
  const double d = std::abs(a - b);
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? d : d / s;
}

inline double max_abs_diff(const mpmedit::MatrixX& a, const mpmedit::MatrixX& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return a.rows() * a.cols() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

template <class Fn>
mpmedit::ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const mpmedit::Error& e) {
    return e.code();
  }
  return mpmedit::ErrorCode::Ok;
}

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mpmedit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline mpmedit::MatrixX random_matrix(mpmedit::Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                                      double hi = 1.0) {
  mpmedit::MatrixX m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

}  // namespace testutil
