#include "tvr/core/autodiff.hpp"

#include "tvr/core/error.hpp"

namespace tvr::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw InvalidArgument("Var::item on a non-scalar node");
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.requires_grad = track_params_ && p.trainable;
  n.param = n.requires_grad ? &p : nullptr;
  Var v = push(std::move(n));
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) throw InvalidArgument("operands recorded on different tapes");
    if (nodes_[p.id_].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1) throw InvalidArgument("backward: root must be scalar");
  backward(root, Matrix::Ones(1, 1));
}

void Tape::backward(Var root, const Matrix& seed) {
  if (root.tape_ != this) throw InvalidArgument("backward: foreign node");
  const Matrix& rv = value(root.id_);
  if (seed.rows() != rv.rows() || seed.cols() != rv.cols()) throw InvalidArgument("backward: seed shape mismatch");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  accumulate(root.id_, seed);
  for (std::int64_t id = root.id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(id));
  }
  for (auto& n : nodes_) {
    if (n.param == nullptr || n.grad.size() == 0) continue;
    if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols())
      n.param->grad.setZero(n.value.rows(), n.value.cols());
    n.param->grad += n.grad;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::clear() {
  nodes_.clear();
  bound_.clear();
}

}  // namespace tvr::ad
