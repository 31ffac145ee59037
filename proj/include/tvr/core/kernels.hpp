#pragma once

#include <optional>

#include "tvr/core/tensor.hpp"

namespace tvr {

// Row-wise softmax, stabilized by subtracting the row max over unmasked
// entries. Masked (false) entries come out exactly 0. A fully masked row
// throws "empty softmax support" unless zero_empty_rows is set, in which case
// the row is left all-zero.
Matrix softmax_rows(const Matrix& m, const BoolMatrix* mask = nullptr, bool zero_empty_rows = false);

// aᵀb / (||a|| ||b||); throws NumericalError("degenerate vector") on a zero norm.
double cosine_similarity(const RowVector& a, const RowVector& b);

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

// log(1 + e^x) without overflow.
double softplus(double x);

constexpr double kLeakySlope = 0.2;

}  // namespace tvr
