#include "tvr/model/losses.hpp"

#include <algorithm>
#include <cmath>

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"

namespace tvr {

LossScalars register_loss_scalars(ParamStore& store) {
  LossScalars s;
  s.logit_scale_log = &store.add("loss.logit_scale_log", Matrix::Constant(1, 1, kLogitScaleInit), true, false);
  s.sigmoid_temp_log = &store.add("loss.sigmoid_temp_log", Matrix::Constant(1, 1, kSigmoidTempInit), true, false);
  s.sigmoid_bias = &store.add("loss.sigmoid_bias", Matrix::Constant(1, 1, kSigmoidBiasInit), true, false);
  return s;
}

void clamp_logit_scale(const LossScalars& scalars) {
  double& v = scalars.logit_scale_log->value(0, 0);
  v = std::min(v, std::log(kLogitScaleMax));
}

ad::Var ce_loss(ad::Var sims, ad::Var scale) {
  if (sims.rows() < 1 || sims.rows() != sims.cols()) throw InvalidArgument("ce_loss: similarity matrix must be square");
  const double b = static_cast<double>(sims.rows());
  ad::Var logits = ad::mul_scalar(sims, scale);
  ad::Var t2v = ad::sum(ad::diagonal(ad::log_softmax_rows(logits)));
  ad::Var v2t = ad::sum(ad::diagonal(ad::log_softmax_rows(ad::transpose(logits))));
  return ad::scale(ad::add(t2v, v2t), -0.5 / b);
}

ad::Var sigmoid_loss(ad::Var sims, ad::Var temp_log, ad::Var bias) {
  if (sims.rows() < 1 || sims.rows() != sims.cols())
    throw InvalidArgument("sigmoid_loss: similarity matrix must be square");
  const Eigen::Index b = sims.rows();
  Matrix signs = Matrix::Constant(b, b, 1.0);
  signs.diagonal().setConstant(-1.0);
  ad::Var logits = ad::add_scalar(ad::mul_scalar(sims, ad::exp(temp_log)), bias);
  return ad::scale(ad::sum(ad::softplus(ad::mask_mul(logits, signs))), 1.0 / static_cast<double>(b));
}

ad::Var contrastive_loss(LossKind kind, ad::Var sims, const LossScalars& scalars) {
  ad::Tape& tape = sims.tape();
  if (kind == LossKind::CrossEntropy) return ce_loss(sims, ad::exp(tape.param(*scalars.logit_scale_log)));
  return sigmoid_loss(sims, tape.param(*scalars.sigmoid_temp_log), tape.param(*scalars.sigmoid_bias));
}

}  // namespace tvr
