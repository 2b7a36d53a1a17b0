#include "famix/training/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "famix/error.hpp"

namespace famix {

double PolySchedule::at(std::int64_t t) const {
  if (total <= 0) throw ConfigError("poly schedule needs a positive iteration count");
  const auto c = std::clamp<std::int64_t>(t, 0, total);
  return lr0 * std::pow(1.0 - static_cast<double>(c) / static_cast<double>(total), power);
}

}  // namespace famix
