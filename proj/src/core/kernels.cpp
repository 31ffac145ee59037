#include "tvr/core/kernels.hpp"

#include <cmath>
#include <limits>

#include "tvr/core/error.hpp"

namespace tvr {

Matrix softmax_rows(const Matrix& m, const BoolMatrix* mask, bool zero_empty_rows) {
  if (mask != nullptr && (mask->rows() != m.rows() || mask->cols() != m.cols()))
    throw InvalidArgument("softmax_rows: mask shape mismatch");
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (mask != nullptr && !(*mask)(i, j)) continue;
      any = true;
      row_max = std::max(row_max, m(i, j));
    }
    if (!any) {
      if (zero_empty_rows) continue;
      throw InvalidArgument("empty softmax support");
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (mask != nullptr && !(*mask)(i, j)) continue;
      const double e = std::exp(m(i, j) - row_max);
      out(i, j) = e;
      total += e;
    }
    out.row(i) /= total;
  }
  return out;
}

double cosine_similarity(const RowVector& a, const RowVector& b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine_similarity: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericalError("degenerate vector");
  return a.dot(b) / (na * nb);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace tvr
