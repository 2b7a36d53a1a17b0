#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace famix {

/// Lower bound applied to every standard deviation so that AdaIN never divides by zero.
inline constexpr double kEpsilonSigma = 1e-6;

/// Conventional "void" label of segmentation datasets.
inline constexpr int kDefaultIgnoreIndex = 255;

/// Real-valued activation map, stored channels-last (row-major H x W x C).
class FeatureMap {
 public:
  enum class Layout { kHWC };

  FeatureMap() = default;
  FeatureMap(int height, int width, int channels);
  FeatureMap(int height, int width, int channels, std::vector<double> data);

  /// Builds a map from a channels-first buffer (C x H x W), e.g. one sample of an NCHW tensor.
  static FeatureMap from_chw(std::span<const float> chw, int height, int width, int channels);
  static FeatureMap from_chw(std::span<const double> chw, int height, int width, int channels);
  void to_chw(std::span<float> out) const;

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  Layout layout() const noexcept { return Layout::kHWC; }
  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int y, int x, int k) { return data_[index(y, x, k)]; }
  double at(int y, int x, int k) const { return data_[index(y, x, k)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t index(int y, int x, int k) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(k);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Per-channel (mean, standard deviation) pair describing the style of a feature map.
struct StyleStats {
  std::vector<double> mu;
  std::vector<double> sigma;

  int channels() const noexcept { return static_cast<int>(mu.size()); }

  /// Throws InvalidInputError when lengths differ, values are non-finite or sigma < kEpsilonSigma.
  void validate() const;

  friend bool operator==(const StyleStats&, const StyleStats&) = default;
};

/// Integer class map with an ignore label.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int height, int width, int num_classes, int ignore_index = kDefaultIgnoreIndex);
  LabelMap(int height, int width, int num_classes, std::vector<std::int32_t> data,
           int ignore_index = kDefaultIgnoreIndex);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int num_classes() const noexcept { return num_classes_; }
  int ignore_index() const noexcept { return ignore_index_; }
  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  std::int32_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::int32_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<std::int32_t> data() noexcept { return data_; }
  std::span<const std::int32_t> data() const noexcept { return data_; }

  /// Every entry is either ignore_index or in [0, num_classes).
  void validate() const;

  /// Crops the rectangle [y0, y0+h) x [x0, x0+w).
  LabelMap crop(int y0, int x0, int h, int w) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  int ignore_index_ = kDefaultIgnoreIndex;
  std::vector<std::int32_t> data_;
};

/// Interpolation weight for style mixing; one value shared by all channels or one per channel.
struct MixWeight {
  enum class Shape { kScalar, kPerChannel };

  std::vector<double> values;
  Shape shape = Shape::kScalar;
  double beta_a = 0.1;
  double beta_b = 0.1;

  static MixWeight scalar(double alpha);
  static MixWeight per_channel(std::vector<double> alphas);

  double at(int channel) const {
    return shape == Shape::kScalar ? values.at(0) : values.at(static_cast<std::size_t>(channel));
  }
};

/// Non-overlapping sqrt(m) x sqrt(m) tiling of a feature map.
class PatchGrid {
 public:
  PatchGrid(int grid_side, int parent_height, int parent_width, int channels,
            std::vector<FeatureMap> patches);

  int grid_side() const noexcept { return grid_side_; }
  int patch_count() const noexcept { return grid_side_ * grid_side_; }
  int patch_height() const noexcept { return parent_height_ / grid_side_; }
  int patch_width() const noexcept { return parent_width_ / grid_side_; }
  int parent_height() const noexcept { return parent_height_; }
  int parent_width() const noexcept { return parent_width_; }
  int channels() const noexcept { return channels_; }

  /// Row-major patch access, i = grid row, j = grid column (both zero-based).
  const FeatureMap& patch(int i, int j) const { return patches_.at(flat(i, j)); }
  FeatureMap& patch(int i, int j) { return patches_.at(flat(i, j)); }
  const std::vector<FeatureMap>& patches() const noexcept { return patches_; }

 private:
  std::size_t flat(int i, int j) const { return static_cast<std::size_t>(i * grid_side_ + j); }

  int grid_side_;
  int parent_height_;
  int parent_width_;
  int channels_;
  std::vector<FeatureMap> patches_;
};

}  // namespace famix
