#pragma once

#include <optional>

#include "famix/bank/style_bank.hpp"
#include "famix/core/random.hpp"

namespace famix {

/// What to do when the requested class has no mined styles.
enum class EmptyClassFallback {
  kError,       // throw MissingStyleError
  kSkipMixing,  // return nullopt; the caller keeps the patch's own style
};

/// Uniform draw from the entries of `class_id` (or of the single key of a global bank).
std::optional<StyleStats> sample_style(const StyleBank& bank, int class_id, Rng& rng,
                                       EmptyClassFallback fallback = EmptyClassFallback::kError);
std::optional<StyleStats> sample_style(const StyleBank& bank, int class_id, std::uint64_t seed,
                                       EmptyClassFallback fallback = EmptyClassFallback::kError);

}  // namespace famix
