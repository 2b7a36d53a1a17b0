#pragma once

#include <optional>
#include <span>
#include <vector>

#include "famix/core/random.hpp"
#include "famix/core/types.hpp"

// Feature-statistics primitives: channel statistics, AdaIN restylization, linear style
// mixing, patch tiling, dominant-class queries and SNR-controlled style perturbation.
// Everything here is a pure function of its arguments (randomness comes in through Rng&).

namespace famix {

/// Spatial mean and population standard deviation per channel; sigma is clamped to
/// kEpsilonSigma. Throws InvalidInputError on non-finite input.
StyleStats channel_stats(const FeatureMap& f);

/// Replaces the channel statistics of `source` with `target_style`:
///   out = sigma_t * (source - mu_s) / sigma_s + mu_t
/// Throws ShapeError when channel counts differ.
FeatureMap adain(const FeatureMap& source, const StyleStats& target_style);

/// Per-channel scale/shift pair such that adain(f, t) == f * scale + shift.
struct AffineRestyle {
  std::vector<double> scale;
  std::vector<double> shift;
};
AffineRestyle adain_affine(const StyleStats& source_style, const StyleStats& target_style);

/// (1 - alpha) * source + alpha * target, for mu and sigma independently.
StyleStats mix_styles(const StyleStats& source, const StyleStats& target, const MixWeight& alpha);

/// Draws alpha ~ Beta(0.1, 0.1): one value, or `channels` i.i.d. values for the per-channel shape.
MixWeight sample_mix_weight(MixWeight::Shape shape, int channels, Rng& rng);
MixWeight sample_mix_weight(MixWeight::Shape shape, int channels, std::uint64_t seed);

/// Tiles f into m = s*s equally sized patches. m must be a perfect square and both spatial
/// dimensions divisible by s; nothing is padded or truncated.
PatchGrid partition(const FeatureMap& f, int m);

/// Inverse of partition.
FeatureMap assemble(const PatchGrid& grid);

/// Side length of the grid for m patches; throws PartitionError if m is not a positive square.
int grid_side_for(int m);

/// Label patches matching partition(f, m) of the feature map the labels annotate. Label
/// resolution may be an integer multiple of the feature resolution.
std::vector<LabelMap> partition_labels(const LabelMap& labels, int m, int feature_height,
                                       int feature_width);

/// Most frequent non-ignore class; ties go to the lowest id; nullopt when all pixels are ignore.
std::optional<int> dominant_class(const LabelMap& patch);

/// Noise vector n_x = 10^(-snr_db / 20) * (|x| / |n|) * n, n ~ N(0, I).
std::vector<double> snr_noise(std::span<const double> signal, double snr_db, Rng& rng);

/// Adds independent SNR-scaled noise to mu and sigma, then re-clamps sigma.
/// snr_db = +inf returns s unchanged. Throws DegenerateSignalError on zero-norm mu or sigma.
StyleStats perturb_with_snr(const StyleStats& s, double snr_db, Rng& rng);
StyleStats perturb_with_snr(const StyleStats& s, double snr_db, std::uint64_t seed);

}  // namespace famix
