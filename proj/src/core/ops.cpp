#include "tvr/core/ops.hpp"

#include <cmath>

#include "tvr/core/error.hpp"
#include "tvr/core/kernels.hpp"

namespace tvr::ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument(std::string(op) + ": shape mismatch");
}

void require_scalar(const Var& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) throw InvalidArgument(std::string(op) + ": expected a 1x1 operand");
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimension mismatch");
  Tape& t = a.tape();
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw InvalidArgument("matmul_nt: inner dimension mismatch");
  Tape& t = a.tape();
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value().transpose(), {a, b}, [ia, ib](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

Var transpose(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().transpose(), {a}, [ia](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a, b, "hadamard");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var divide(Var a, Var b) {
  require_same_shape(a, b, "divide");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseQuotient(b.value()), {a, b}, [ia, ib](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& bv = t.value(ib);
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseQuotient(bv));
    if (t.requires_grad(ib)) t.accumulate(ib, -g.cwiseProduct(t.value(self)).cwiseQuotient(bv));
  });
}

Var scale(Var a, double c) {
  const auto ia = a.id();
  return a.tape().record(a.value() * c, {a}, [ia, c](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self) * c);
  });
}

Var add_scalar(Var a, double c) {
  const auto ia = a.id();
  return a.tape().record(a.value().array() + c, {a}, [ia](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self));
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw InvalidArgument("add_row: shape mismatch");
  const auto ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw InvalidArgument("mul_row: shape mismatch");
  const auto ia = a.id(), ir = row.id();
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Matrix ga = g.array().rowwise() * t.value(ir).row(0).array();
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ir)) t.accumulate(ir, g.cwiseProduct(t.value(ia)).colwise().sum());
  });
}

Var add_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw InvalidArgument("add_col: shape mismatch");
  const auto ia = a.id(), ic = col.id();
  Matrix out = a.value().colwise() + col.value().col(0);
  return a.tape().record(std::move(out), {a, col}, [ia, ic](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.requires_grad(ic)) t.accumulate(ic, g.rowwise().sum());
  });
}

Var mul_scalar(Var a, Var s) {
  require_scalar(s, "mul_scalar");
  const auto ia = a.id(), is = s.id();
  return a.tape().record(a.value() * s.value()(0, 0), {a, s}, [ia, is](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(is)(0, 0));
    if (t.requires_grad(is)) t.accumulate(is, Matrix::Constant(1, 1, g.cwiseProduct(t.value(ia)).sum()));
  });
}

Var add_scalar(Var a, Var s) {
  require_scalar(s, "add_scalar");
  const auto ia = a.id(), is = s.id();
  return a.tape().record(a.value().array() + s.value()(0, 0), {a, s}, [ia, is](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.requires_grad(is)) t.accumulate(is, Matrix::Constant(1, 1, g.sum()));
  });
}

Var outer_add(Var col, Var row) {
  if (col.cols() != 1 || row.rows() != 1) throw InvalidArgument("outer_add: expects a column and a row");
  const auto ic = col.id(), ir = row.id();
  Matrix out = col.value().replicate(1, row.cols()).rowwise() + row.value().row(0);
  return col.tape().record(std::move(out), {col, row}, [ic, ir](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ic)) t.accumulate(ic, g.rowwise().sum());
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var exp(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().array().exp().matrix(), {a}, [ia](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var log(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().array().log().matrix(), {a}, [ia](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self).cwiseQuotient(t.value(ia)));
  });
}

Var relu(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().cwiseMax(0.0), {a}, [ia](Tape& t, std::uint32_t self) {
    Matrix g = (t.value(ia).array() > 0.0).select(t.grad(self), 0.0);
    t.accumulate(ia, g);
  });
}

Var leaky_relu(Var a, double slope) {
  const auto ia = a.id();
  Matrix out = (a.value().array() > 0.0).select(a.value(), slope * a.value());
  return a.tape().record(std::move(out), {a}, [ia, slope](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    Matrix ga = (t.value(ia).array() > 0.0).select(g, slope * g);
    t.accumulate(ia, ga);
  });
}

Var softplus(Var a) {
  const auto ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) { return tvr::softplus(x); });
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::uint32_t self) {
    // d/dx softplus = sigmoid(x)
    Matrix sig = t.value(ia).unaryExpr([](double x) {
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    t.accumulate(ia, t.grad(self).cwiseProduct(sig));
  });
}

Var square(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().cwiseAbs2(), {a}, [ia](Tape& t, std::uint32_t self) {
    t.accumulate(ia, 2.0 * t.grad(self).cwiseProduct(t.value(ia)));
  });
}

Var softmax_rows(Var a, const BoolMatrix* mask, bool zero_empty_rows) {
  const auto ia = a.id();
  return a.tape().record(tvr::softmax_rows(a.value(), mask, zero_empty_rows), {a}, [ia](Tape& t, std::uint32_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    // Masked entries have y = 0 and therefore receive no gradient.
    ColVector dot = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = y.cwiseProduct(g.colwise() - dot);
    t.accumulate(ia, ga);
  });
}

Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    Matrix p = t.value(self).array().exp();
    ColVector gs = g.rowwise().sum();
    Matrix ga = g - (p.array().colwise() * gs.array()).matrix();
    t.accumulate(ia, ga);
  });
}

Var mask_mul(Var a, const Matrix& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) throw InvalidArgument("mask_mul: shape mismatch");
  const auto ia = a.id();
  return a.tape().record(a.value().cwiseProduct(mask), {a}, [ia, mask](Tape& t, std::uint32_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(mask));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no operands");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw InvalidArgument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::uint32_t, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    spans.emplace_back(p.id(), offset);
    offset += p.cols();
  }
  return parts[0].tape().record(std::move(out), parts, [spans](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, off] : spans)
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(off, t.value(id).cols()));
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no operands");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw InvalidArgument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::uint32_t, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    spans.emplace_back(p.id(), offset);
    offset += p.rows();
  }
  return parts[0].tape().record(std::move(out), parts, [spans](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, off] : spans)
      if (t.requires_grad(id)) t.accumulate(id, g.middleRows(off, t.value(id).rows()));
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw InvalidArgument("slice_rows: out of range");
  const auto ia = a.id();
  return a.tape().record(a.value().middleRows(start, count), {a}, [ia, start, count](Tape& t, std::uint32_t self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.middleRows(start, count) = t.grad(self);
    t.accumulate(ia, g);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw InvalidArgument("slice_cols: out of range");
  const auto ia = a.id();
  return a.tape().record(a.value().middleCols(start, count), {a}, [ia, start, count](Tape& t, std::uint32_t self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.middleCols(start, count) = t.grad(self);
    t.accumulate(ia, g);
  });
}

Var sum(Var a) {
  const auto ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, a.value().sum()), {a}, [ia](Tape& t, std::uint32_t self) {
    const double g = t.grad(self)(0, 0);
    t.accumulate(ia, Matrix::Constant(t.value(ia).rows(), t.value(ia).cols(), g));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw InvalidArgument("mean: empty operand");
  return scale(sum(a), 1.0 / n);
}

Var col_mean(Var a) {
  if (a.rows() == 0) throw InvalidArgument("col_mean: empty operand");
  const auto ia = a.id();
  const double n = static_cast<double>(a.rows());
  return a.tape().record(a.value().colwise().mean(), {a}, [ia, n](Tape& t, std::uint32_t self) {
    Matrix g = (t.grad(self) / n).replicate(t.value(ia).rows(), 1);
    t.accumulate(ia, g);
  });
}

Var row_mean(Var a) {
  if (a.cols() == 0) throw InvalidArgument("row_mean: empty operand");
  const auto ia = a.id();
  const double n = static_cast<double>(a.cols());
  return a.tape().record(a.value().rowwise().mean(), {a}, [ia, n](Tape& t, std::uint32_t self) {
    Matrix g = (t.grad(self) / n).replicate(1, t.value(ia).cols());
    t.accumulate(ia, g);
  });
}

Var row_sum(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().rowwise().sum(), {a}, [ia](Tape& t, std::uint32_t self) {
    Matrix g = t.grad(self).replicate(1, t.value(ia).cols());
    t.accumulate(ia, g);
  });
}

Var diagonal(Var a) {
  if (a.rows() != a.cols()) throw InvalidArgument("diagonal: matrix must be square");
  const auto ia = a.id();
  return a.tape().record(a.value().diagonal(), {a}, [ia](Tape& t, std::uint32_t self) {
    const Eigen::Index n = t.value(ia).rows();
    Matrix g = Matrix::Zero(n, n);
    g.diagonal() = t.grad(self).col(0);
    t.accumulate(ia, g);
  });
}

namespace {

Var extremum(Var a, bool want_max) {
  if (a.value().size() == 0) throw InvalidArgument("max/min of an empty operand");
  Eigen::Index r = 0, c = 0;
  const double v = want_max ? a.value().maxCoeff(&r, &c) : a.value().minCoeff(&r, &c);
  const auto ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, v), {a}, [ia, r, c](Tape& t, std::uint32_t self) {
    Matrix g = Matrix::Zero(t.value(ia).rows(), t.value(ia).cols());
    g(r, c) = t.grad(self)(0, 0);
    t.accumulate(ia, g);
  });
}

}  // namespace

Var max_all(Var a) { return extremum(a, true); }
Var min_all(Var a) { return extremum(a, false); }

Var l2_norm(Var a) {
  const double n = a.value().norm();
  const auto ia = a.id();
  return a.tape().record(Matrix::Constant(1, 1, n), {a}, [ia](Tape& t, std::uint32_t self) {
    const double norm = t.value(self)(0, 0);
    if (norm == 0.0) throw NumericalError("degenerate vector");
    t.accumulate(ia, t.value(ia) * (t.grad(self)(0, 0) / norm));
  });
}

Var row_norms(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().rowwise().norm(), {a}, [ia](Tape& t, std::uint32_t self) {
    const Matrix& n = t.value(self);
    if ((n.array() == 0.0).any()) throw NumericalError("degenerate vector");
    ColVector factor = t.grad(self).col(0).cwiseQuotient(n.col(0));
    Matrix g = t.value(ia).array().colwise() * factor.array();
    t.accumulate(ia, g);
  });
}

Var row_cosine(Var a, Var b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw InvalidArgument("row_cosine: shape mismatch");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const double nb = bv.norm();
  ColVector na = av.rowwise().norm();
  if (nb == 0.0 || (na.array() == 0.0).any()) throw NumericalError("degenerate vector");
  ColVector cos = (av * bv.transpose()).col(0).cwiseQuotient(na) / nb;
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(Matrix(cos), {a, b}, [ia, ib, na, nb](Tape& t, std::uint32_t self) {
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    const ColVector c = t.value(self).col(0);
    const ColVector g = t.grad(self).col(0);
    if (t.requires_grad(ia)) {
      // d c_i / d a_i = b / (|a_i||b|) - c_i a_i / |a_i|^2
      ColVector coef_b = g.cwiseQuotient(na) / nb;
      ColVector coef_a = -(g.cwiseProduct(c)).cwiseQuotient(na.cwiseAbs2());
      Matrix ga = coef_b * bv + (av.array().colwise() * coef_a.array()).matrix();
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      // d c_i / d b = a_i / (|a_i||b|) - c_i b / |b|^2
      ColVector coef = g.cwiseQuotient(na) / nb;
      Matrix gb = coef.transpose() * av - (g.dot(c) / (nb * nb)) * bv;
      t.accumulate(ib, gb);
    }
  });
}

Var cosine(Var a, Var b) {
  if (a.rows() != 1) throw InvalidArgument("cosine: expects row vectors");
  return row_cosine(a, b);
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Matrix& xv = x.value();
  const Eigen::Index c = xv.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c)
    throw InvalidArgument("layer_norm_rows: gain/bias shape mismatch");
  ColVector mu = xv.rowwise().mean();
  Matrix centered = xv.colwise() - mu;
  ColVector inv_std = ((centered.cwiseAbs2().rowwise().mean()).array() + eps).rsqrt();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  const auto ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, gain, bias}, [ix, ig, ib, xhat, inv_std](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
    if (t.requires_grad(ix)) {
      Matrix dxhat = g.array().rowwise() * t.value(ig).row(0).array();
      ColVector m1 = dxhat.rowwise().mean();
      ColVector m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
      Matrix dx = (dxhat.colwise() - m1) - (xhat.array().colwise() * m2.array()).matrix();
      dx = dx.array().colwise() * inv_std.array();
      t.accumulate(ix, dx);
    }
  });
}

Var assemble(std::span<const Var> scalars, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(scalars.size()) != rows * cols) throw InvalidArgument("assemble: count mismatch");
  if (scalars.empty()) throw InvalidArgument("assemble: no operands");
  Matrix out(rows, cols);
  std::vector<std::uint32_t> ids;
  ids.reserve(scalars.size());
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    require_scalar(scalars[k], "assemble");
    out.data()[k] = scalars[k].value()(0, 0);
    ids.push_back(scalars[k].id());
  }
  return scalars[0].tape().record(std::move(out), scalars, [ids](Tape& t, std::uint32_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (t.requires_grad(ids[k])) t.accumulate(ids[k], Matrix::Constant(1, 1, g.data()[k]));
  });
}

}  // namespace tvr::ad
