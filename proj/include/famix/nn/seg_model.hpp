#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <torch/torch.h>
#include <vector>

#include "famix/nn/backbone.hpp"

namespace famix {

struct HeadConfig {
  int aspp_channels = 48;
  std::vector<int> atrous_rates = {1, 2, 3};
  int low_level_channels = 24;
  int fuse_channels = 48;

  static HeadConfig desk();
  static HeadConfig paper();
};

/// Atrous spatial pyramid (1x1, dilated 3x3 branches, image pooling) with a low-level skip
/// from Layer1, DeepLabv3+ style.
class DeepLabHeadImpl : public torch::nn::Module {
 public:
  DeepLabHeadImpl(int in_channels, int low_level_in, int num_classes, const HeadConfig& config);
  /// Logits at Layer1 resolution.
  torch::Tensor forward(const torch::Tensor& high, const torch::Tensor& low);

 private:
  std::vector<torch::nn::Sequential> branches_;
  torch::nn::Conv2d pool_conv_{nullptr};
  torch::nn::Sequential project_{nullptr}, low_{nullptr}, fuse_{nullptr};
  torch::nn::Conv2d classifier_{nullptr};
};
TORCH_MODULE(DeepLabHead);

/// Parameter groups addressed by freeze policies, in forward order.
enum class ModelGroup { kStem, kLayer1, kLayer2, kLayer3, kLayer4, kLayer4Tail, kDecoder };
inline constexpr std::array<ModelGroup, 7> kAllGroups = {
    ModelGroup::kStem,   ModelGroup::kLayer1,     ModelGroup::kLayer2, ModelGroup::kLayer3,
    ModelGroup::kLayer4, ModelGroup::kLayer4Tail, ModelGroup::kDecoder};
std::string to_string(ModelGroup g);

/// Called on Layer1 features (N x C x h x w) before the rest of the network; returns the
/// features to continue with.
using Layer1Hook = std::function<torch::Tensor(const torch::Tensor&)>;

class SegModelImpl : public torch::nn::Module {
 public:
  SegModelImpl(const TrunkConfig& trunk, const HeadConfig& head, int num_classes,
               std::uint64_t encoder_seed);

  /// Logits bilinearly upsampled to the input resolution.
  torch::Tensor forward(const torch::Tensor& images, const Layer1Hook& hook = {});

  torch::nn::Module& group(ModelGroup g);
  std::vector<torch::Tensor> group_parameters(ModelGroup g);
  /// Parameters and buffers (batch-norm statistics) of a group.
  std::vector<torch::Tensor> group_state(ModelGroup g);
  std::uint64_t group_checksum(ModelGroup g);

  int num_classes() const { return num_classes_; }
  ResNetTrunk trunk{nullptr};
  DeepLabHead head{nullptr};

 private:
  int num_classes_;
};
TORCH_MODULE(SegModel);

}  // namespace famix
