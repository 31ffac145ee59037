#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "tvr/core/params.hpp"

namespace tvr {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entries whose analytic and numeric magnitudes are both below the floor
  // are compared on an absolute scale (|a - n| / floor). The floor is
  // max(magnitude_floor, scale_floor * largest gradient magnitude seen).
  double magnitude_floor = 1e-6;
  double scale_floor = 1e-4;
};

struct GradCheckParamSummary {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  double floor = 0.0;
  bool passed = true;
  std::vector<GradCheckParamSummary> params;
};

// The objective returns f(params). When called with accumulate_grads = true it
// must also add ∂f/∂p into Parameter::grad for every trainable parameter.
using Objective = std::function<double(bool accumulate_grads)>;

// Compares the provided gradient of every trainable scalar against the central
// difference (f(x+h) - f(x-h)) / 2h. Throws NumericalError("non-finite
// objective") if any evaluation is not finite.
GradCheckReport grad_check(const Objective& f, ParamStore& params, const GradCheckOptions& opts = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace tvr
