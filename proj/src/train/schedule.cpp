#include "tvr/train/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tvr {

std::int64_t warmup_steps(std::int64_t total_steps, double warmup_fraction) {
  return static_cast<std::int64_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
}

double warmup_cosine(std::int64_t step, std::int64_t total_steps, double warmup_fraction) {
  if (total_steps <= 0) return 0.0;
  const std::int64_t warm = warmup_steps(total_steps, warmup_fraction);
  if (step < warm) return static_cast<double>(step) / static_cast<double>(std::max<std::int64_t>(1, warm));
  const double progress =
      static_cast<double>(step - warm) / static_cast<double>(std::max<std::int64_t>(1, total_steps - warm));
  return std::max(0.0, 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0))));
}

}  // namespace tvr
