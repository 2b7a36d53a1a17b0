#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <torch/torch.h>
#include <vector>

#include "famix/bank/sampling.hpp"
#include "famix/bank/style_bank.hpp"
#include "famix/core/types.hpp"
#include "famix/mining/miner.hpp"

namespace famix {

enum class AugmentVariant {
  kLanguage,  // styles mined with prompts (T)
  kNoise,     // SNR-perturbed source styles
  kNone,      // no synthetic styles
  kMixStyle,  // vanilla MixStyle: batch-shuffled whole-map statistics
};
enum class MixSource { kT, kS, kST };
enum class Locality { kLocal, kGlobal };

std::string to_string(AugmentVariant v);
std::string to_string(MixSource s);
std::string to_string(Locality l);
AugmentVariant parse_augment_variant(const std::string& s);
MixSource parse_mix_source(const std::string& s);
Locality parse_locality(const std::string& s);

struct AugmentMode {
  AugmentVariant variant = AugmentVariant::kLanguage;
  bool mix = true;
  MixSource mix_source = MixSource::kT;
  Locality locality = Locality::kLocal;
  double snr_db = 20.0;
  /// Chance that a batch is randomized at all.
  double probability = 1.0;
  MixWeight::Shape alpha_shape = MixWeight::Shape::kScalar;
  EmptyClassFallback empty_class = EmptyClassFallback::kSkipMixing;

  /// Throws ConfigError naming the inconsistent field.
  void validate() const;
  bool passthrough() const { return variant == AugmentVariant::kNone && !mix; }
  bool needs_mined_bank() const;
  bool needs_source_styles() const;
  std::string describe() const;
};

/// Style sets sampled during randomization: T (mined) and S (harvested source styles).
struct StyleSets {
  const StyleBank* mined = nullptr;
  const StyleBank* source = nullptr;
};

/// Everything drawn for one batch. targets[n][p] is the style patch p of sample n is
/// restylized to (nullopt = left unchanged). Patches are row-major over the grid.
struct RandomizationPlan {
  bool applied = false;
  int grid_side = 1;
  std::optional<MixWeight> alpha;
  std::vector<std::int64_t> permutation;
  std::vector<std::vector<StyleStats>> source_styles;
  std::vector<std::vector<std::optional<StyleStats>>> targets;

  std::size_t restyled_patches() const;
};

struct RandomizeOptions {
  int m = 16;
  std::uint64_t seed = 0;
  /// Replaces the Beta draw (tests and arm-equivalence checks).
  std::optional<MixWeight> forced_alpha;
};

/// Per-sample, per-patch dominant classes (nullopt for all-ignore patches).
std::vector<std::vector<std::optional<int>>> patch_classes(std::span<const LabelMap> labels, int m,
                                                           int feature_height, int feature_width);

/// Draws the plan from per-patch source styles and dominant classes.
RandomizationPlan plan_randomization(const std::vector<std::vector<StyleStats>>& source_styles,
                                     const std::vector<std::vector<std::optional<int>>>& classes,
                                     const StyleSets& sets, const AugmentMode& mode,
                                     const RandomizeOptions& options);

struct RandomizedBatch {
  std::vector<FeatureMap> features;
  RandomizationPlan plan;
};

/// Patch-wise style randomization of Layer1 features on FeatureMaps. For the mixing arms each
/// patch is restylized to mix(own style, sampled style, alpha); with mix off, to the sampled
/// style; (none, off) returns the input unchanged.
RandomizedBatch randomize_batch(const std::vector<FeatureMap>& features,
                                const std::vector<LabelMap>& labels, const StyleSets& sets,
                                const AugmentMode& mode, const RandomizeOptions& options);

/// Same plan applied to an N x C x h x w tensor as a per-patch affine map, so gradients flow
/// through the features while the statistics are treated as constants.
torch::Tensor randomize_tensor(const torch::Tensor& layer1, const std::vector<LabelMap>& labels,
                               const StyleSets& sets, const AugmentMode& mode,
                               const RandomizeOptions& options, RandomizationPlan* plan_out = nullptr);

/// Vanilla MixStyle on whole maps: partner = random permutation of the batch, one scalar
/// alpha. Throws DegenerateBatchError for a batch of one.
RandomizedBatch mixstyle_batch(const std::vector<FeatureMap>& features, std::uint64_t seed,
                               std::optional<MixWeight> forced_alpha = std::nullopt);

/// Class-wise source styles S^(k): channel_stats of every patch stored under its dominant
/// class, without optimization.
StyleBank build_source_style_set(std::span<const FeatureBatch> batches, int m,
                                 const std::vector<std::string>& class_names);

}  // namespace famix
