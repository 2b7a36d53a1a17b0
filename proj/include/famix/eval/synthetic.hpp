#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "famix/eval/dataset.hpp"

// Procedural two-domain corpus for desk-scale experiments. Scenes are Voronoi layouts of
// four textured classes. In the source domain each class also has a characteristic colour;
// the shifted domain partially recolours (blend with rotated channels), colour-casts and
// contrast-reduces copies of held-out source scenes, so a model that leans on colour
// instead of texture degrades.

namespace famix {

struct SyntheticCorpusOptions {
  int image_size = 64;
  int train_images = 96;
  int val_images = 32;
  int regions = 6;
  std::uint64_t seed = 7;
};

inline const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names = {"road", "building", "vegetation", "sky"};
  return names;
}

/// One source-domain scene.
Sample make_synthetic_scene(int image_size, int regions, std::uint64_t seed);

/// Recoloured, contrast-shifted copy of an image (labels are unchanged).
RgbImage shift_domain(const RgbImage& image, std::uint64_t seed);

struct SyntheticCorpus {
  std::vector<Sample> train;
  std::vector<Sample> val_source;
  std::vector<Sample> val_shifted;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusOptions& options);

/// Writes images, labels, manifest.txt (splits train / val_source / val_shifted) and
/// classes.txt under `dir`. Returns the manifest path.
std::filesystem::path write_synthetic_corpus(const SyntheticCorpusOptions& options,
                                             const std::filesystem::path& dir);

}  // namespace famix
