#include "famix/training/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "famix/core/random.hpp"
#include "famix/core/style_ops.hpp"
#include "famix/error.hpp"

namespace famix {

std::string to_string(AugmentVariant v) {
  switch (v) {
    case AugmentVariant::kLanguage: return "language";
    case AugmentVariant::kNoise: return "noise";
    case AugmentVariant::kNone: return "none";
    case AugmentVariant::kMixStyle: return "mixstyle";
  }
  return "?";
}

std::string to_string(MixSource s) {
  switch (s) {
    case MixSource::kT: return "T";
    case MixSource::kS: return "S";
    case MixSource::kST: return "S+T";
  }
  return "?";
}

std::string to_string(Locality l) { return l == Locality::kLocal ? "local" : "global"; }

AugmentVariant parse_augment_variant(const std::string& s) {
  if (s == "language") return AugmentVariant::kLanguage;
  if (s == "noise") return AugmentVariant::kNoise;
  if (s == "none") return AugmentVariant::kNone;
  if (s == "mixstyle") return AugmentVariant::kMixStyle;
  throw ConfigError(fmt::format("unknown augment '{}' (expected language, noise, none or mixstyle)", s));
}

MixSource parse_mix_source(const std::string& s) {
  if (s == "T") return MixSource::kT;
  if (s == "S") return MixSource::kS;
  if (s == "S+T" || s == "ST" || s == "S∪T") return MixSource::kST;
  throw ConfigError(fmt::format("unknown mix_source '{}' (expected T, S or S+T)", s));
}

Locality parse_locality(const std::string& s) {
  if (s == "local") return Locality::kLocal;
  if (s == "global") return Locality::kGlobal;
  throw ConfigError(fmt::format("unknown locality '{}' (expected local or global)", s));
}

void AugmentMode::validate() const {
  if (variant == AugmentVariant::kNone && mix && mix_source != MixSource::kS) {
    throw ConfigError("augment=none with mix=on mixes source styles only: set mix_source=S");
  }
  if (variant == AugmentVariant::kMixStyle && !mix) {
    throw ConfigError("augment=mixstyle always mixes: set mix=on");
  }
  if (variant == AugmentVariant::kMixStyle && alpha_shape != MixWeight::Shape::kScalar) {
    throw ConfigError("augment=mixstyle uses a scalar alpha");
  }
  if (variant == AugmentVariant::kNoise && std::isnan(snr_db)) {
    throw ConfigError("augment=noise needs a numeric snr_db");
  }
  if (variant == AugmentVariant::kNoise && mix_source != MixSource::kT) {
    throw ConfigError("augment=noise samples its perturbed bank: set mix_source=T");
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ConfigError(fmt::format("mix_probability {} outside [0, 1]", probability));
  }
  if (locality == Locality::kGlobal &&
      (variant != AugmentVariant::kLanguage || mix_source != MixSource::kT)) {
    throw ConfigError("locality=global samples a globally mined bank: needs augment=language, mix_source=T");
  }
}

bool AugmentMode::needs_mined_bank() const {
  return (variant == AugmentVariant::kLanguage || variant == AugmentVariant::kNoise) &&
         mix_source != MixSource::kS;
}

bool AugmentMode::needs_source_styles() const {
  return variant != AugmentVariant::kMixStyle &&
         (mix_source == MixSource::kS || mix_source == MixSource::kST) && !passthrough();
}

std::string AugmentMode::describe() const {
  std::string s = "augment=" + to_string(variant);
  if (variant == AugmentVariant::kNoise) s += fmt::format("(snr_db={})", snr_db);
  s += std::string(" mix=") + (mix ? "on" : "off");
  if (variant != AugmentVariant::kMixStyle) {
    s += " mix_source=" + to_string(mix_source) + " locality=" + to_string(locality);
  }
  return s;
}

std::size_t RandomizationPlan::restyled_patches() const {
  std::size_t n = 0;
  for (const auto& row : targets)
    for (const auto& t : row) n += t.has_value();
  return n;
}

std::vector<std::vector<std::optional<int>>> patch_classes(std::span<const LabelMap> labels, int m,
                                                           int feature_height, int feature_width) {
  std::vector<std::vector<std::optional<int>>> out;
  for (const auto& y : labels) {
    std::vector<std::optional<int>> row;
    for (const auto& lp : partition_labels(y, m, feature_height, feature_width)) row.push_back(dominant_class(lp));
    out.push_back(std::move(row));
  }
  return out;
}

namespace {

const StyleBank& require(const StyleBank* bank, const char* what) {
  if (!bank) throw ConfigError(fmt::format("randomization needs {} but none was provided", what));
  return *bank;
}

bool has_entries(const StyleBank* bank, int key) {
  return bank && !bank->entries(bank->is_global() ? 0 : key).empty();
}

}  // namespace

RandomizationPlan plan_randomization(const std::vector<std::vector<StyleStats>>& source_styles,
                                     const std::vector<std::vector<std::optional<int>>>& classes,
                                     const StyleSets& sets, const AugmentMode& mode,
                                     const RandomizeOptions& options) {
  mode.validate();
  RandomizationPlan plan;
  plan.source_styles = source_styles;
  const std::size_t n = source_styles.size();
  const std::size_t patches = n ? source_styles.front().size() : 0;
  plan.grid_side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(std::max<std::size_t>(patches, 1)))));
  plan.targets.assign(n, std::vector<std::optional<StyleStats>>(patches));
  if (mode.passthrough() || n == 0) return plan;

  const int channels = source_styles.front().front().channels();
  for (const StyleBank* b : {sets.mined, sets.source}) {
    if (b && b->channels() != channels) {
      throw ShapeError(fmt::format("style bank has {} channels, features {}", b->channels(), channels));
    }
  }
  if (mode.probability < 1.0) {
    Rng gate(derive_seed(options.seed, {2}));
    if (std::uniform_real_distribution<double>(0.0, 1.0)(gate) >= mode.probability) return plan;
  }
  plan.applied = true;
  if (mode.mix) {
    if (options.forced_alpha) {
      plan.alpha = *options.forced_alpha;
    } else {
      Rng arng(derive_seed(options.seed, {0}));
      plan.alpha = sample_mix_weight(mode.alpha_shape, channels, arng);
    }
  }
  Rng pick(derive_seed(options.seed, {1}));

  if (mode.variant == AugmentVariant::kMixStyle) {
    if (n < 2) throw DegenerateBatchError("MixStyle needs a batch of at least two feature maps");
    plan.permutation.resize(n);
    std::iota(plan.permutation.begin(), plan.permutation.end(), 0);
    std::shuffle(plan.permutation.begin(), plan.permutation.end(), pick);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < patches; ++p) {
        const auto& partner = source_styles[static_cast<std::size_t>(plan.permutation[i])][p];
        plan.targets[i][p] = mix_styles(source_styles[i][p], partner, *plan.alpha);
      }
    }
    return plan;
  }

  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < patches; ++p) {
      const StyleStats& own = source_styles[i][p];
      std::optional<StyleStats> sampled;
      if (mode.locality == Locality::kGlobal) {
        const auto& bank = require(sets.mined, "a mined style bank");
        if (!bank.is_global()) throw ConfigError("locality=global needs a globally mined bank");
        sampled = sample_style(bank, 0, pick, mode.empty_class);
      } else {
        const auto cls = classes.at(i).at(p);
        if (!cls) continue;
        const StyleBank* bank = nullptr;
        switch (mode.mix_source) {
          case MixSource::kT: bank = &require(sets.mined, "a mined style bank (T)"); break;
          case MixSource::kS: bank = &require(sets.source, "source styles (S)"); break;
          case MixSource::kST: {
            const bool use_t = coin(pick);
            const StyleBank* first = use_t ? sets.mined : sets.source;
            const StyleBank* second = use_t ? sets.source : sets.mined;
            require(sets.mined, "a mined style bank (T)");
            require(sets.source, "source styles (S)");
            bank = has_entries(first, *cls) ? first : second;
            break;
          }
        }
        sampled = sample_style(*bank, *cls, pick, mode.empty_class);
      }
      if (!sampled) continue;
      plan.targets[i][p] = mode.mix ? mix_styles(own, *sampled, *plan.alpha) : *sampled;
    }
  }
  return plan;
}

namespace {

int effective_m(const AugmentMode& mode, int m) {
  return mode.variant == AugmentVariant::kMixStyle || mode.locality == Locality::kGlobal ? 1 : m;
}

}  // namespace

RandomizedBatch randomize_batch(const std::vector<FeatureMap>& features,
                                const std::vector<LabelMap>& labels, const StyleSets& sets,
                                const AugmentMode& mode, const RandomizeOptions& options) {
  mode.validate();
  if (mode.passthrough()) return {features, RandomizationPlan{}};
  const int m = effective_m(mode, options.m);
  const bool need_labels = m > 1 || mode.variant == AugmentVariant::kLanguage ||
                           mode.variant == AugmentVariant::kNone;
  if (need_labels && mode.locality == Locality::kLocal && labels.size() != features.size()) {
    throw ShapeError(fmt::format("{} feature maps but {} label maps", features.size(), labels.size()));
  }
  std::vector<PatchGrid> grids;
  std::vector<std::vector<StyleStats>> styles;
  std::vector<std::vector<std::optional<int>>> classes(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    grids.push_back(partition(features[i], m));
    std::vector<StyleStats> row;
    for (const auto& p : grids.back().patches()) row.push_back(channel_stats(p));
    styles.push_back(std::move(row));
    if (i < labels.size() && mode.variant != AugmentVariant::kMixStyle) {
      for (const auto& lp : partition_labels(labels[i], m, features[i].height(), features[i].width())) {
        classes[i].push_back(dominant_class(lp));
      }
    } else {
      classes[i].assign(static_cast<std::size_t>(m), std::nullopt);
    }
  }
  RandomizedBatch out;
  out.plan = plan_randomization(styles, classes, sets, mode, {m, options.seed, options.forced_alpha});
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& grid = grids[i];
    for (int p = 0; p < grid.patch_count(); ++p) {
      const auto& target = out.plan.targets[i][static_cast<std::size_t>(p)];
      if (!target) continue;
      auto& patch = grid.patch(p / grid.grid_side(), p % grid.grid_side());
      patch = adain(patch, *target);
    }
    out.features.push_back(assemble(grid));
  }
  return out;
}

torch::Tensor randomize_tensor(const torch::Tensor& layer1, const std::vector<LabelMap>& labels,
                               const StyleSets& sets, const AugmentMode& mode,
                               const RandomizeOptions& options, RandomizationPlan* plan_out) {
  mode.validate();
  if (mode.passthrough()) {
    if (plan_out) *plan_out = RandomizationPlan{};
    return layer1;
  }
  if (layer1.dim() != 4) throw ShapeError("expected N x C x h x w Layer1 features");
  const int m = effective_m(mode, options.m);
  const int s = grid_side_for(m);
  const int64_t n = layer1.size(0), c = layer1.size(1), h = layer1.size(2), w = layer1.size(3);
  if (h % s != 0 || w % s != 0) {
    throw PartitionError(fmt::format("{}x{} features do not tile into {}x{} patches", h, w, s, s));
  }
  const int64_t ph = h / s, pw = w / s;

  // Patch statistics in double precision, detached from the graph.
  auto x = layer1.detach().to(torch::kFloat64).view({n, c, s, ph, s, pw});
  auto mu = x.mean({3, 5});                                           // n, c, s, s
  auto sd = x.var({3, 5}, /*unbiased=*/false).sqrt().clamp_min(kEpsilonSigma);
  auto mu_a = mu.accessor<double, 4>();
  auto sd_a = sd.accessor<double, 4>();

  std::vector<std::vector<StyleStats>> styles(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    for (int r = 0; r < s; ++r) {
      for (int q = 0; q < s; ++q) {
        StyleStats st;
        for (int64_t k = 0; k < c; ++k) {
          st.mu.push_back(mu_a[i][k][r][q]);
          st.sigma.push_back(sd_a[i][k][r][q]);
        }
        styles[static_cast<std::size_t>(i)].push_back(std::move(st));
      }
    }
  }
  std::vector<std::vector<std::optional<int>>> classes;
  if (mode.variant == AugmentVariant::kMixStyle || mode.locality == Locality::kGlobal) {
    classes.assign(static_cast<std::size_t>(n), std::vector<std::optional<int>>(static_cast<std::size_t>(m)));
  } else {
    if (static_cast<int64_t>(labels.size()) != n) {
      throw ShapeError(fmt::format("{} feature maps but {} label maps", n, labels.size()));
    }
    classes = patch_classes(labels, m, static_cast<int>(h), static_cast<int>(w));
  }
  auto plan = plan_randomization(styles, classes, sets, mode, {m, options.seed, options.forced_alpha});

  auto scale = torch::ones({n, c, s, s}, torch::kFloat64);
  auto shift = torch::zeros({n, c, s, s}, torch::kFloat64);
  auto sc = scale.accessor<double, 4>();
  auto sh = shift.accessor<double, 4>();
  for (int64_t i = 0; i < n; ++i) {
    for (int p = 0; p < m; ++p) {
      const auto& target = plan.targets[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)];
      if (!target) continue;
      const auto a = adain_affine(styles[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)], *target);
      for (int64_t k = 0; k < c; ++k) {
        sc[i][k][p / s][p % s] = a.scale[static_cast<std::size_t>(k)];
        sh[i][k][p / s][p % s] = a.shift[static_cast<std::size_t>(k)];
      }
    }
  }
  const bool any = plan.restyled_patches() > 0;
  if (plan_out) *plan_out = std::move(plan);
  if (!any) return layer1;
  const auto dtype = layer1.scalar_type();
  auto out = layer1.view({n, c, s, ph, s, pw}) * scale.to(dtype).view({n, c, s, 1, s, 1}) +
             shift.to(dtype).view({n, c, s, 1, s, 1});
  return out.view({n, c, h, w});
}

RandomizedBatch mixstyle_batch(const std::vector<FeatureMap>& features, std::uint64_t seed,
                               std::optional<MixWeight> forced_alpha) {
  if (features.size() < 2) throw DegenerateBatchError("MixStyle needs a batch of at least two feature maps");
  AugmentMode mode;
  mode.variant = AugmentVariant::kMixStyle;
  mode.mix = true;
  return randomize_batch(features, {}, {}, mode, {1, seed, forced_alpha});
}

StyleBank build_source_style_set(std::span<const FeatureBatch> batches, int m,
                                 const std::vector<std::string>& class_names) {
  if (batches.empty() || batches.front().features.empty()) {
    throw InvalidInputError("source style set needs at least one feature map");
  }
  MiningMetadata md;
  md.source = StyleSource::kSource;
  md.patches_m = static_cast<std::uint32_t>(m);
  StyleBank bank(batches.front().features.front().channels(), class_names, md);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    std::uint64_t local = 0;
    for (std::size_t i = 0; i < batch.features.size(); ++i) {
      const auto& f = batch.features[i];
      const auto grid = partition(f, m);
      const auto lps = partition_labels(batch.labels.at(i), m, f.height(), f.width());
      for (std::size_t p = 0; p < lps.size(); ++p, ++local) {
        const auto cls = dominant_class(lps[p]);
        if (!cls) continue;
        bank.add(*cls, StyleEntry{channel_stats(grid.patches()[p]), "", make_patch_id(b, local), 0.0, 0});
      }
    }
  }
  return bank;
}

}  // namespace famix
