#include "famix/core/types.hpp"

#include <cmath>
#include <fmt/format.h>

#include "famix/error.hpp"

namespace famix {

namespace {

void check_dims(int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ShapeError(fmt::format("feature map dimensions must be positive, got {}x{}x{}", height,
                                 width, channels));
  }
}

template <typename T>
FeatureMap chw_to_map(std::span<const T> chw, int height, int width, int channels) {
  check_dims(height, width, channels);
  const std::size_t plane = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (chw.size() != plane * static_cast<std::size_t>(channels)) {
    throw ShapeError(fmt::format("CHW buffer has {} values, expected {}", chw.size(),
                                 plane * static_cast<std::size_t>(channels)));
  }
  FeatureMap out(height, width, channels);
  auto dst = out.data();
  for (int k = 0; k < channels; ++k) {
    const T* src = chw.data() + static_cast<std::size_t>(k) * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      dst[p * static_cast<std::size_t>(channels) + static_cast<std::size_t>(k)] =
          static_cast<double>(src[p]);
    }
  }
  return out;
}

}  // namespace

FeatureMap::FeatureMap(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(pixels() * static_cast<std::size_t>(channels), 0.0);
}

FeatureMap::FeatureMap(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != pixels() * static_cast<std::size_t>(channels)) {
    throw ShapeError(fmt::format("feature map {}x{}x{} needs {} values, got {}", height, width,
                                 channels, pixels() * static_cast<std::size_t>(channels),
                                 data_.size()));
  }
}

FeatureMap FeatureMap::from_chw(std::span<const float> chw, int height, int width, int channels) {
  return chw_to_map(chw, height, width, channels);
}

FeatureMap FeatureMap::from_chw(std::span<const double> chw, int height, int width,
                                int channels) {
  return chw_to_map(chw, height, width, channels);
}

void FeatureMap::to_chw(std::span<float> out) const {
  if (out.size() != data_.size()) {
    throw ShapeError(fmt::format("CHW output has {} slots, expected {}", out.size(), data_.size()));
  }
  const std::size_t plane = pixels();
  for (std::size_t p = 0; p < plane; ++p) {
    for (int k = 0; k < channels_; ++k) {
      out[static_cast<std::size_t>(k) * plane + p] =
          static_cast<float>(data_[p * static_cast<std::size_t>(channels_) + k]);
    }
  }
}

bool FeatureMap::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void StyleStats::validate() const {
  if (mu.empty() || mu.size() != sigma.size()) {
    throw InvalidInputError(fmt::format("style has {} means and {} deviations", mu.size(),
                                        sigma.size()));
  }
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!std::isfinite(mu[k]) || !std::isfinite(sigma[k])) {
      throw InvalidInputError(fmt::format("style channel {} is not finite", k));
    }
    if (sigma[k] < kEpsilonSigma) {
      throw InvalidInputError(
          fmt::format("style channel {} has sigma {} below {}", k, sigma[k], kEpsilonSigma));
    }
  }
}

LabelMap::LabelMap(int height, int width, int num_classes, int ignore_index)
    : LabelMap(height, width, num_classes,
               std::vector<std::int32_t>(static_cast<std::size_t>(std::max(height, 0)) *
                                             static_cast<std::size_t>(std::max(width, 0)),
                                         ignore_index),
               ignore_index) {}

LabelMap::LabelMap(int height, int width, int num_classes, std::vector<std::int32_t> data,
                   int ignore_index)
    : height_(height),
      width_(width),
      num_classes_(num_classes),
      ignore_index_(ignore_index),
      data_(std::move(data)) {
  if (height < 1 || width < 1 || num_classes < 1) {
    throw ShapeError(fmt::format("label map {}x{} with {} classes is invalid", height, width,
                                 num_classes));
  }
  if (ignore_index >= 0 && ignore_index < num_classes) {
    throw InvalidInputError(
        fmt::format("ignore index {} collides with class range [0, {})", ignore_index,
                    num_classes));
  }
  if (data_.size() != pixels()) {
    throw ShapeError(
        fmt::format("label map {}x{} needs {} values, got {}", height, width, pixels(),
                    data_.size()));
  }
}

void LabelMap::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const auto v = data_[i];
    if (v != ignore_index_ && (v < 0 || v >= num_classes_)) {
      throw InvalidInputError(fmt::format("label {} at pixel {} outside [0, {}) and not ignore {}",
                                          v, i, num_classes_, ignore_index_));
    }
  }
}

LabelMap LabelMap::crop(int y0, int x0, int h, int w) const {
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > height_ || x0 + w > width_) {
    throw ShapeError(fmt::format("crop [{}, {}) x [{}, {}) outside {}x{} label map", y0, y0 + h,
                                 x0, x0 + w, height_, width_));
  }
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) out.push_back(at(y, x));
  }
  return LabelMap(h, w, num_classes_, std::move(out), ignore_index_);
}

MixWeight MixWeight::scalar(double alpha) {
  MixWeight w;
  w.values = {alpha};
  w.shape = Shape::kScalar;
  return w;
}

MixWeight MixWeight::per_channel(std::vector<double> alphas) {
  MixWeight w;
  w.values = std::move(alphas);
  w.shape = Shape::kPerChannel;
  return w;
}

PatchGrid::PatchGrid(int grid_side, int parent_height, int parent_width, int channels,
                     std::vector<FeatureMap> patches)
    : grid_side_(grid_side),
      parent_height_(parent_height),
      parent_width_(parent_width),
      channels_(channels),
      patches_(std::move(patches)) {
  if (grid_side < 1 || patches_.size() != static_cast<std::size_t>(grid_side * grid_side)) {
    throw PartitionError(fmt::format("grid of side {} cannot hold {} patches", grid_side,
                                     patches_.size()));
  }
}

}  // namespace famix
