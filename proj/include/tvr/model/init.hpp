#pragma once

#include <cmath>

#include "tvr/core/rng.hpp"

namespace tvr {

inline Matrix xavier_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(rows + cols));
  return rng.normal_matrix(rows, cols, stddev);
}

inline Matrix identity_plus_noise(Eigen::Index n, double stddev, Rng& rng) {
  Matrix m = Matrix::Identity(n, n);
  if (stddev > 0.0) m += rng.normal_matrix(n, n, stddev);
  return m;
}

}  // namespace tvr
