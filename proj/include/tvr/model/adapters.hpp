#pragma once

#include "tvr/core/autodiff.hpp"
#include "tvr/core/rng.hpp"

namespace tvr {

// Trainable affine maps applied to raw text and frame embeddings, row-wise:
// x' = x W + b. They stand in for fine-tuning the upstream encoders.
struct AdapterParams {
  bool enabled = false;
  Parameter* text_weight = nullptr;   // d x d, initialized I + N(0, 1e-3)
  Parameter* text_bias = nullptr;     // 1 x d, zeros
  Parameter* frame_weight = nullptr;  // d x d
  Parameter* frame_bias = nullptr;    // 1 x d
};

// Registers nothing when disabled.
AdapterParams register_adapters(ParamStore& store, Eigen::Index dim, bool enabled, Rng& rng);

struct AdaptedPair {
  ad::Var text;    // 1 x d
  ad::Var frames;  // M x d
};

AdaptedPair adapt(ad::Var text, ad::Var frames, const AdapterParams& params);
ad::Var adapt_text(ad::Var text, const AdapterParams& params);
ad::Var adapt_frames(ad::Var frames, const AdapterParams& params);

}  // namespace tvr
