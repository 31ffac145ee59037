#include "tvr/model/adapters.hpp"

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"
#include "tvr/model/init.hpp"

namespace tvr {

AdapterParams register_adapters(ParamStore& store, Eigen::Index dim, bool enabled, Rng& rng) {
  AdapterParams p;
  p.enabled = enabled;
  if (!enabled) return p;
  p.text_weight = &store.add("adapter.text.weight", identity_plus_noise(dim, 1e-3, rng));
  p.text_bias = &store.add("adapter.text.bias", Matrix::Zero(1, dim), true, false);
  p.frame_weight = &store.add("adapter.frame.weight", identity_plus_noise(dim, 1e-3, rng));
  p.frame_bias = &store.add("adapter.frame.bias", Matrix::Zero(1, dim), true, false);
  return p;
}

ad::Var adapt_text(ad::Var text, const AdapterParams& params) {
  if (!params.enabled) return text;
  ad::Tape& t = text.tape();
  if (text.cols() != params.text_weight->value.rows()) throw InvalidArgument("adapt: text dimension mismatch");
  return ad::add_row(ad::matmul(text, t.param(*params.text_weight)), t.param(*params.text_bias));
}

ad::Var adapt_frames(ad::Var frames, const AdapterParams& params) {
  if (!params.enabled) return frames;
  ad::Tape& t = frames.tape();
  if (frames.cols() != params.frame_weight->value.rows()) throw InvalidArgument("adapt: frame dimension mismatch");
  return ad::add_row(ad::matmul(frames, t.param(*params.frame_weight)), t.param(*params.frame_bias));
}

AdaptedPair adapt(ad::Var text, ad::Var frames, const AdapterParams& params) {
  return {adapt_text(text, params), adapt_frames(frames, params)};
}

}  // namespace tvr
