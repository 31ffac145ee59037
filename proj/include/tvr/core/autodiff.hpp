#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>

#include "tvr/core/params.hpp"
#include "tvr/core/tensor.hpp"

namespace tvr::ad {

class Tape;

// Handle to a value recorded on a Tape. Copyable; valid until the tape is cleared.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double item() const;  // value of a 1x1 node

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Records matrix-valued operations in evaluation order and replays their
// vector-Jacobian products in reverse. Nodes that do not depend on any
// gradient-requiring leaf carry no backward closure, so a tape built with
// track_params = false over constant inputs is a plain forward evaluator.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(bool track_params = true) : track_params_(track_params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);  // leaf that receives a gradient
  // Leaf bound to a parameter; bound once per tape. Its gradient is added to
  // Parameter::grad by backward() when the tape tracks parameters.
  Var param(Parameter& p);

  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var record(Matrix value, std::span<const Var> parents, Backward backward);

  void backward(Var root);  // root must be 1x1
  void backward(Var root, const Matrix& seed);

  const Matrix& value(std::uint32_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::uint32_t id) const { return nodes_[id].grad; }
  Matrix grad(Var v) const;  // zeros when the node was not reached
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }
  bool tracks_params() const { return track_params_; }

  template <class Expr>
  void accumulate(std::uint32_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> bound_;
  bool track_params_;
};

}  // namespace tvr::ad
