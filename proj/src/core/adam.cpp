#include "tvr/core/adam.hpp"

#include <cmath>

#include "tvr/core/error.hpp"

namespace tvr {

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& opts) {
  for (const Parameter* p : params) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      throw InvalidArgument("adam_step: gradient shape mismatch for " + p->name);
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    auto [it, inserted] = state.moments.try_emplace(p->name);
    AdamMoments& m = it->second;
    if (inserted) {
      m.first = Matrix::Zero(p->value.rows(), p->value.cols());
      m.second = Matrix::Zero(p->value.rows(), p->value.cols());
    } else if (m.first.rows() != p->value.rows() || m.first.cols() != p->value.cols()) {
      throw InvalidArgument("adam_step: optimizer state shape mismatch for " + p->name);
    }
    m.first = opts.beta1 * m.first + (1.0 - opts.beta1) * p->grad;
    m.second = opts.beta2 * m.second + (1.0 - opts.beta2) * p->grad.cwiseAbs2();
    if (p->decay && opts.weight_decay != 0.0) p->value *= (1.0 - opts.lr * opts.weight_decay);
    p->value.array() -= opts.lr * (m.first.array() / bc1) / ((m.second.array() / bc2).sqrt() + opts.eps);
  }
}

}  // namespace tvr
