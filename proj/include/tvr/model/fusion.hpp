#pragma once

#include "tvr/core/autodiff.hpp"
#include "tvr/core/rng.hpp"

namespace tvr {

enum class FusionKind { CrossAttention, Mean };

struct FusionOptions {
  FusionKind kind = FusionKind::CrossAttention;
  Eigen::Index proj_dim = 0;  // 0 selects d
  double dropout = 0.3;       // on attention weights, training only
};

// Single-head text-conditioned cross-attention pooling:
//   Q = t W_Q, K = F W_K, V = F W_V, a = softmax(Q Kᵀ / sqrt(d_p))
//   z = LN1((a V) W_O), v = LN2(FC(z) + z)
struct FusionParams {
  FusionKind kind = FusionKind::CrossAttention;
  Eigen::Index proj_dim = 0;
  double dropout = 0.0;
  Parameter* w_q = nullptr;  // d x d_p
  Parameter* w_k = nullptr;  // d x d_p
  Parameter* w_v = nullptr;  // d x d_p
  Parameter* w_o = nullptr;  // d_p x d
  Parameter* fc_weight = nullptr;  // d x d (out x in)
  Parameter* fc_bias = nullptr;    // 1 x d
  Parameter* ln1_gain = nullptr;
  Parameter* ln1_bias = nullptr;
  Parameter* ln2_gain = nullptr;
  Parameter* ln2_bias = nullptr;
};

FusionParams register_fusion(ParamStore& store, Eigen::Index dim, const FusionOptions& opts, Rng& rng);

constexpr double kLayerNormEps = 1e-5;

// frames: M x d, condition: 1 x d. Returns v (1 x d). When attention_out is
// given, it receives the post-softmax (pre-dropout) weights over frames.
ad::Var fuse_frames(ad::Var frames, ad::Var condition, const FusionParams& params, bool training, Rng* rng,
                    Matrix* attention_out = nullptr);

}  // namespace tvr
