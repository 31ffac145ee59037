#include "tvr/model/stochastic_text.hpp"

#include "tvr/core/error.hpp"
#include "tvr/core/ops.hpp"

namespace tvr {

namespace {
constexpr double kDegenerateGap = 1e-12;
}

RadiusProjector register_radius(ParamStore& store, Eigen::Index frames, Eigen::Index dim, Rng& rng,
                                double init_std) {
  RadiusProjector p;
  p.weight = &store.add("stochastic.radius.weight", rng.normal_matrix(frames, dim, init_std));
  return p;
}

ad::Var compute_radius(ad::Var text, ad::Var frames, const RadiusProjector& proj) {
  if (frames.rows() != proj.weight->value.rows() || text.cols() != proj.weight->value.cols())
    throw InvalidArgument("compute_radius: shape mismatch");
  ad::Var sims = ad::transpose(ad::row_cosine(frames, text));  // 1 x M
  return ad::exp(ad::matmul(sims, text.tape().param(*proj.weight)));
}

Matrix draw_candidate_noise(Eigen::Index count, Eigen::Index dim, Rng& rng) {
  if (count < 0) throw InvalidArgument("candidate count must be non-negative");
  return rng.normal_matrix(count, dim, 1.0);
}

ad::Var make_candidates(ad::Var text, ad::Var radius, const Matrix& noise) {
  if (noise.cols() != text.cols()) throw InvalidArgument("make_candidates: noise width mismatch");
  ad::Tape& t = text.tape();
  const Eigen::Index count = noise.rows();
  ad::Var base = t.constant(Matrix::Ones(count, 1));
  ad::Var tiled = ad::matmul(base, text);  // S x d copies of t
  return ad::add(tiled, ad::mul_row(t.constant(noise), radius));
}

SupportText support_text(ad::Var text, ad::Var video, ad::Var radius) {
  const Matrix gap = video.value() - text.value();
  if (gap.norm() < kDegenerateGap) return {text, true};
  ad::Var diff = ad::sub(video, text);
  ad::Var ratio = ad::divide(ad::l2_norm(radius), ad::l2_norm(diff));
  return {ad::add(text, ad::mul_scalar(diff, ratio)), false};
}

}  // namespace tvr
