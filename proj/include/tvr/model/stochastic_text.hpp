#pragma once

#include "tvr/core/autodiff.hpp"
#include "tvr/core/rng.hpp"

namespace tvr {

// Maps frame-text cosine similarities (M) to a per-dimension radius (d).
struct RadiusProjector {
  Parameter* weight = nullptr;  // M x d
};

RadiusProjector register_radius(ParamStore& store, Eigen::Index frames, Eigen::Index dim, Rng& rng,
                                double init_std = 0.02);

// r = exp(sᵀ W) with s_j = cos(t, f_j). text: 1 x d, frames: M x d.
ad::Var compute_radius(ad::Var text, ad::Var frames, const RadiusProjector& proj);

// S x d standard normal draws.
Matrix draw_candidate_noise(Eigen::Index count, Eigen::Index dim, Rng& rng);

// Rows t + r ⊙ eps_k, k = 1..S. noise may have zero rows.
ad::Var make_candidates(ad::Var text, ad::Var radius, const Matrix& noise);

struct SupportText {
  ad::Var text;
  bool degenerate = false;  // v and t coincided; text is t itself
};

// t + (v - t) / ||v - t|| * ||r||
SupportText support_text(ad::Var text, ad::Var video, ad::Var radius);

}  // namespace tvr
