#pragma once

#include "tvr/core/autodiff.hpp"

namespace tvr {

enum class LossKind { CrossEntropy, Sigmoid };

struct LossScalars {
  Parameter* logit_scale_log = nullptr;  // CE scale is exp of this, capped at 100
  Parameter* sigmoid_temp_log = nullptr;
  Parameter* sigmoid_bias = nullptr;
};

inline constexpr double kLogitScaleInit = 2.6592600369327779;  // ln(1 / 0.07)
inline constexpr double kLogitScaleMax = 100.0;
inline constexpr double kSigmoidTempInit = 4.77;
inline constexpr double kSigmoidBiasInit = -12.93;

LossScalars register_loss_scalars(ParamStore& store);
void clamp_logit_scale(const LossScalars& scalars);

// Symmetric cross entropy with diagonal positives; scale is 1x1.
ad::Var ce_loss(ad::Var sims, ad::Var scale);
// (1/B) sum_ij softplus(-z_ij (exp(temp_log) s_ij + bias)), z = +1 on the diagonal.
ad::Var sigmoid_loss(ad::Var sims, ad::Var temp_log, ad::Var bias);

ad::Var contrastive_loss(LossKind kind, ad::Var sims, const LossScalars& scalars);

}  // namespace tvr
