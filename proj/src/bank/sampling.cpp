#include "famix/bank/sampling.hpp"

#include <fmt/format.h>

#include "famix/error.hpp"

namespace famix {

std::optional<StyleStats> sample_style(const StyleBank& bank, int class_id, Rng& rng,
                                       EmptyClassFallback fallback) {
  const int key = bank.is_global() ? 0 : class_id;
  const auto& entries = bank.entries(key);
  if (entries.empty()) {
    if (fallback == EmptyClassFallback::kSkipMixing) return std::nullopt;
    throw MissingStyleError(fmt::format("no mined style for class {} ('{}')", key,
                                        bank.class_names()[static_cast<std::size_t>(key)]));
  }
  std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
  return entries[pick(rng)].style;
}

std::optional<StyleStats> sample_style(const StyleBank& bank, int class_id, std::uint64_t seed,
                                       EmptyClassFallback fallback) {
  Rng rng(seed);
  return sample_style(bank, class_id, rng, fallback);
}

}  // namespace famix
