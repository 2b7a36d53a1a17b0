#pragma once

#include <cstdint>
#include <vector>

#include "famix/core/random.hpp"
#include "famix/eval/dataset.hpp"

namespace famix {

struct JitterOptions {
  double brightness = 0.3;
  double contrast = 0.3;
  double saturation = 0.3;
  bool hflip = true;
  /// Square crop side; 0 keeps the full image.
  int crop = 0;
};

/// Colour jitter (brightness, contrast, saturation factors uniform in [1 - s, 1 + s], applied
/// in random order), then a random crop and a horizontal flip with probability 0.5. The crop
/// and flip act identically on image and labels.
Sample augment_sample(const Sample& sample, const JitterOptions& options, Rng& rng);

/// Horizontal mirror of an image / label map.
RgbImage hflip(const RgbImage& image);
LabelMap hflip(const LabelMap& labels);
RgbImage crop(const RgbImage& image, int y0, int x0, int h, int w);

/// Dataset indices of one batch. Each epoch visits a fresh seeded permutation, so the batch at
/// a given iteration depends only on (dataset_size, batch_size, iteration, seed).
std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, std::int64_t iteration,
                                       std::uint64_t seed);

}  // namespace famix
