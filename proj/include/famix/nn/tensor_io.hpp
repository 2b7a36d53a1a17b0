#pragma once

#include <cstdint>
#include <torch/torch.h>
#include <vector>

#include "famix/core/types.hpp"
#include "famix/eval/dataset.hpp"

namespace famix {

/// CLIP image normalization applied to RGB values in [0, 1] (N x 3 x H x W).
torch::Tensor normalize_rgb(const torch::Tensor& rgb01);

/// N x 3 x H x W float tensor with values in [0, 1]; all images must share a size.
torch::Tensor images_to_tensor(const std::vector<const RgbImage*>& images);
/// N x H x W int64 tensor.
torch::Tensor labels_to_tensor(const std::vector<const LabelMap*>& labels);
LabelMap tensor_to_labels(const torch::Tensor& hw, int num_classes, int ignore_index);

/// One sample of an N x C x H x W tensor as a FeatureMap (double precision).
FeatureMap tensor_to_feature_map(const torch::Tensor& chw);
torch::Tensor feature_map_to_tensor(const FeatureMap& f,
                                    torch::ScalarType dtype = torch::kFloat64);
std::vector<FeatureMap> batch_to_feature_maps(const torch::Tensor& nchw);
torch::Tensor feature_maps_to_batch(const std::vector<FeatureMap>& maps,
                                    torch::ScalarType dtype = torch::kFloat32);

StyleStats tensor_to_style(const torch::Tensor& mu, const torch::Tensor& sigma);

/// FNV-1a over the raw bytes of each tensor (made contiguous on CPU), in order.
std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors);

}  // namespace famix
