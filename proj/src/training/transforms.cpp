#include "famix/training/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "famix/error.hpp"

namespace famix {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

double gray(const RgbImage& img, std::size_t px) {
  return 0.299 * img.data[px * 3] + 0.587 * img.data[px * 3 + 1] + 0.114 * img.data[px * 3 + 2];
}

void adjust_brightness(RgbImage& img, double f) {
  for (auto& v : img.data) v = to_byte(v * f);
}

void adjust_contrast(RgbImage& img, double f) {
  const std::size_t n = img.data.size() / 3;
  double mean = 0.0;
  for (std::size_t p = 0; p < n; ++p) mean += gray(img, p);
  mean /= static_cast<double>(std::max<std::size_t>(n, 1));
  for (auto& v : img.data) v = to_byte(mean + f * (v - mean));
}

void adjust_saturation(RgbImage& img, double f) {
  const std::size_t n = img.data.size() / 3;
  for (std::size_t p = 0; p < n; ++p) {
    const double g = gray(img, p);
    for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = to_byte(g + f * (img.data[p * 3 + c] - g));
  }
}

}  // namespace

RgbImage hflip(const RgbImage& image) {
  RgbImage out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

LabelMap hflip(const LabelMap& labels) {
  LabelMap out = labels;
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) out.at(y, x) = labels.at(y, labels.width() - 1 - x);
  return out;
}

RgbImage crop(const RgbImage& image, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > image.height || x0 + w > image.width) {
    throw ShapeError(fmt::format("crop {}x{}+{}+{} outside {}x{} image", h, w, y0, x0, image.height, image.width));
  }
  RgbImage out{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w * 3)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y0 + y, x0 + x, c);
  return out;
}

Sample augment_sample(const Sample& sample, const JitterOptions& options, Rng& rng) {
  if (sample.image.height != sample.labels.height() || sample.image.width != sample.labels.width()) {
    throw ShapeError("image and label map sizes differ");
  }
  Sample out = sample;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto factor = [&](double s) { return 1.0 - s + 2.0 * s * u01(rng); };
  const std::array<double, 3> factors = {factor(options.brightness), factor(options.contrast),
                                         factor(options.saturation)};
  std::array<int, 3> order = {0, 1, 2};
  std::shuffle(order.begin(), order.end(), rng);
  for (int op : order) {
    if (op == 0 && options.brightness > 0) adjust_brightness(out.image, factors[0]);
    if (op == 1 && options.contrast > 0) adjust_contrast(out.image, factors[1]);
    if (op == 2 && options.saturation > 0) adjust_saturation(out.image, factors[2]);
  }
  if (options.crop > 0) {
    const int h = out.image.height, w = out.image.width;
    if (options.crop > h || options.crop > w) {
      throw ConfigError(fmt::format("crop {} larger than {}x{} image", options.crop, h, w));
    }
    const int y0 = std::uniform_int_distribution<int>(0, h - options.crop)(rng);
    const int x0 = std::uniform_int_distribution<int>(0, w - options.crop)(rng);
    out.image = crop(out.image, y0, x0, options.crop, options.crop);
    out.labels = out.labels.crop(y0, x0, options.crop, options.crop);
  }
  if (options.hflip && u01(rng) < 0.5) {
    out.image = hflip(out.image);
    out.labels = hflip(out.labels);
  }
  return out;
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, std::int64_t iteration,
                                       std::uint64_t seed) {
  if (dataset_size == 0 || batch_size <= 0 || iteration < 0) {
    throw ConfigError("batch_indices needs a non-empty dataset, positive batch size and iteration >= 0");
  }
  std::vector<std::size_t> out;
  std::uint64_t pos = static_cast<std::uint64_t>(iteration) * static_cast<std::uint64_t>(batch_size);
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> perm(dataset_size);
  for (int b = 0; b < batch_size; ++b, ++pos) {
    const std::uint64_t epoch = pos / dataset_size;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(derive_seed(seed, {epoch}));
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % dataset_size]);
  }
  return out;
}

}  // namespace famix
