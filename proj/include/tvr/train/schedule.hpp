#pragma once

#include <cstdint>

namespace tvr {

// Linear warmup over the first warmup_fraction of total_steps, then cosine
// decay to zero. Returns the multiplier on the peak learning rate for the
// update taken at step (0-based).
double warmup_cosine(std::int64_t step, std::int64_t total_steps, double warmup_fraction);

std::int64_t warmup_steps(std::int64_t total_steps, double warmup_fraction);

}  // namespace tvr
