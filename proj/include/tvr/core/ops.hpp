#pragma once

#include <span>
#include <vector>

#include "tvr/core/autodiff.hpp"

// Differentiable matrix kernels recorded on a Tape. Shapes follow the row
// convention: vectors are 1 x n, node/frame stacks are rows x features.
namespace tvr::ad {

Var matmul(Var a, Var b);     // a b
Var matmul_nt(Var a, Var b);  // a bᵀ
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var divide(Var a, Var b);  // elementwise
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);

Var add_row(Var a, Var row);  // broadcast 1 x c over rows
Var mul_row(Var a, Var row);  // elementwise with broadcast 1 x c
Var add_col(Var a, Var col);  // broadcast r x 1 over columns
Var mul_scalar(Var a, Var s);  // s is 1x1
Var add_scalar(Var a, Var s);  // s is 1x1
Var outer_add(Var col, Var row);  // (r x 1) + (1 x c) -> r x c

Var exp(Var a);
Var log(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var softplus(Var a);
Var square(Var a);

Var softmax_rows(Var a, const BoolMatrix* mask = nullptr, bool zero_empty_rows = false);
Var log_softmax_rows(Var a);
Var mask_mul(Var a, const Matrix& mask);  // multiply by a constant (dropout)

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);

Var sum(Var a);       // 1x1
Var mean(Var a);      // 1x1
Var col_mean(Var a);  // mean over rows -> 1 x c
Var row_mean(Var a);  // mean over cols -> r x 1
Var row_sum(Var a);   // sum over cols -> r x 1
Var diagonal(Var a);  // square -> n x 1
Var max_all(Var a);   // 1x1, gradient to the first maximal entry
Var min_all(Var a);

Var l2_norm(Var a);    // Frobenius norm, 1x1
Var row_norms(Var a);  // r x 1
// Cosine between each row of a (r x d) and b (1 x d) -> r x 1.
Var row_cosine(Var a, Var b);
Var cosine(Var a, Var b);  // two 1 x d rows -> 1x1

Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);

// Packs 1x1 nodes into a rows x cols matrix in row-major order.
Var assemble(std::span<const Var> scalars, Eigen::Index rows, Eigen::Index cols);

}  // namespace tvr::ad
