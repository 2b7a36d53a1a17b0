#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace famix {

/// Explicit random stream threaded through every randomized operation.
using Rng = std::mt19937_64;

/// Mixes a base seed with stream coordinates (batch index, patch index, ...) into an
/// independent seed. Used so that results do not depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Draw from Beta(a, b). Works in log space so that small shape parameters (a, b << 1),
/// whose gamma draws routinely underflow, still produce values in [0, 1].
double sample_beta(Rng& rng, double a, double b);

}  // namespace famix
