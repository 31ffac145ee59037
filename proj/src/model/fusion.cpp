#include "tvr/model/fusion.hpp"

#include <cmath>

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"
#include "tvr/model/init.hpp"

namespace tvr {

namespace {

// Projections start at the identity when square, the usual init for
// text-conditioned pooling heads; rectangular ones fall back to Xavier.
Matrix projection_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows == cols) return identity_plus_noise(rows, 1e-3, rng);
  return xavier_normal(rows, cols, rng);
}

}  // namespace

FusionParams register_fusion(ParamStore& store, Eigen::Index dim, const FusionOptions& opts, Rng& rng) {
  FusionParams p;
  p.kind = opts.kind;
  p.dropout = opts.dropout;
  p.proj_dim = opts.proj_dim > 0 ? opts.proj_dim : dim;
  if (opts.dropout < 0.0 || opts.dropout >= 1.0) throw InvalidArgument("fusion dropout must lie in [0, 1)");
  if (p.kind == FusionKind::Mean) return p;
  const Eigen::Index dp = p.proj_dim;
  p.w_q = &store.add("fusion.w_q", projection_init(dim, dp, rng));
  p.w_k = &store.add("fusion.w_k", projection_init(dim, dp, rng));
  p.w_v = &store.add("fusion.w_v", projection_init(dim, dp, rng));
  p.w_o = &store.add("fusion.w_o", projection_init(dp, dim, rng));
  p.fc_weight = &store.add("fusion.fc.weight", projection_init(dim, dim, rng));
  p.fc_bias = &store.add("fusion.fc.bias", Matrix::Zero(1, dim), true, false);
  p.ln1_gain = &store.add("fusion.ln1.gain", Matrix::Ones(1, dim), true, false);
  p.ln1_bias = &store.add("fusion.ln1.bias", Matrix::Zero(1, dim), true, false);
  p.ln2_gain = &store.add("fusion.ln2.gain", Matrix::Ones(1, dim), true, false);
  p.ln2_bias = &store.add("fusion.ln2.bias", Matrix::Zero(1, dim), true, false);
  return p;
}

ad::Var fuse_frames(ad::Var frames, ad::Var condition, const FusionParams& params, bool training, Rng* rng,
                    Matrix* attention_out) {
  if (frames.rows() < 1 || frames.cols() < 1) throw InvalidArgument("fuse_frames: empty frame stack");
  if (condition.rows() != 1 || condition.cols() != frames.cols())
    throw InvalidArgument("fuse_frames: condition must be 1 x d");
  if (params.kind == FusionKind::Mean) {
    if (attention_out != nullptr) *attention_out = Matrix::Constant(1, frames.rows(), 1.0 / static_cast<double>(frames.rows()));
    return ad::col_mean(frames);
  }
  ad::Tape& t = frames.tape();
  if (frames.cols() != params.w_q->value.rows()) throw InvalidArgument("fuse_frames: dimension mismatch");

  ad::Var q = ad::matmul(condition, t.param(*params.w_q));
  ad::Var k = ad::matmul(frames, t.param(*params.w_k));
  ad::Var v = ad::matmul(frames, t.param(*params.w_v));
  ad::Var logits = ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(params.proj_dim)));
  ad::Var attn = ad::softmax_rows(logits);
  if (attention_out != nullptr) *attention_out = attn.value();
  if (training && params.dropout > 0.0) {
    if (rng == nullptr) throw InvalidArgument("fuse_frames: training dropout needs an Rng");
    const double keep = 1.0 - params.dropout;
    // A mask that drops every frame is redrawn; the pooled video would be all zeros.
    Matrix mask = Matrix::Zero(1, attn.cols());
    while (mask.isZero()) {
      for (Eigen::Index j = 0; j < mask.cols(); ++j) mask(0, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    attn = ad::mask_mul(attn, mask);
  }
  ad::Var pooled = ad::matmul(ad::matmul(attn, v), t.param(*params.w_o));
  ad::Var z = ad::layer_norm_rows(pooled, t.param(*params.ln1_gain), t.param(*params.ln1_bias), kLayerNormEps);
  ad::Var fc = ad::add_row(ad::matmul_nt(z, t.param(*params.fc_weight)), t.param(*params.fc_bias));
  return ad::layer_norm_rows(ad::add(fc, z), t.param(*params.ln2_gain), t.param(*params.ln2_bias), kLayerNormEps);
}

}  // namespace tvr
