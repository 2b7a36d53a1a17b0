#pragma once

#include <cstdint>

namespace famix {

/// lr(t) = lr0 * (1 - t / T)^power, t clamped to [0, T].
struct PolySchedule {
  double lr0 = 0.0;
  std::int64_t total = 1;
  double power = 0.9;

  double at(std::int64_t t) const;
};

}  // namespace famix
