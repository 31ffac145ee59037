#pragma once

#include <string>
#include <vector>

#include "tvr/core/grad_check.hpp"
#include "tvr/train/config.hpp"

namespace tvr {

// d=8, M=3, S=2, H=2, L=2, B=3 with dropout on.
RunConfig tiny_config();

// Loss paths: ce, sigmoid, eam-cossim, eam-bilinear, eam-mlp, total.
const std::vector<std::string>& grad_check_paths();

// Builds a tiny model and synthetic batch, fixes the fake samples, dropout
// masks and candidate noise, and checks every parameter gradient of the
// selected loss path against central differences.
GradCheckReport grad_check_path(const std::string& path, std::uint64_t seed, const GradCheckOptions& opts = {});

}  // namespace tvr
