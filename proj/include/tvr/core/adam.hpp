#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "tvr/core/params.hpp"

namespace tvr {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; applied only to parameters with decay = true
};

struct AdamMoments {
  Matrix first;
  Matrix second;
};

struct AdamState {
  std::int64_t step = 0;
  std::map<std::string, AdamMoments> moments;  // keyed by parameter name
};

// One bias-corrected Adam update driven by Parameter::grad. Moments are
// zero-initialized lazily on first sight of a parameter.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& opts);

}  // namespace tvr
