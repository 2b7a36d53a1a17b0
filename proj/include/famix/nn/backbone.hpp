#pragma once

#include <array>
#include <cstdint>
#include <torch/torch.h>

namespace famix {

/// Widths and depths of the residual trunk. Stage 4 keeps its resolution (dilation) so the
/// trunk ends at output stride 16, or 8 with dilated stage 3 as well.
struct TrunkConfig {
  int stem_width = 16;
  std::array<int, 4> widths = {16, 32, 64, 96};
  std::array<int, 4> blocks = {1, 1, 1, 2};
  /// Number of final stage-4 blocks forming the "layer4 tail" group.
  int tail_blocks = 1;
  int output_stride = 16;

  static TrunkConfig desk();
  static TrunkConfig paper();
  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

class BasicBlockImpl : public torch::nn::Module {
 public:
  BasicBlockImpl(int in_channels, int out_channels, int stride, int dilation);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
  torch::nn::Sequential downsample_{nullptr};
};
TORCH_MODULE(BasicBlock);

/// Image-encoder trunk: three-convolution stem with average pooling (stride 4), then four
/// residual stages. Layer1 output is where styles are mined and randomized.
class ResNetTrunkImpl : public torch::nn::Module {
 public:
  explicit ResNetTrunkImpl(const TrunkConfig& config);

  torch::Tensor forward_layer1(const torch::Tensor& images);
  /// Stages 2-4 applied to (possibly restylized) Layer1 features.
  torch::Tensor forward_from_layer1(const torch::Tensor& layer1);
  torch::Tensor forward(const torch::Tensor& images) {
    return forward_from_layer1(forward_layer1(images));
  }

  const TrunkConfig& config() const { return config_; }
  int layer1_channels() const { return config_.widths[0]; }
  int out_channels() const { return config_.widths[3]; }

  torch::nn::Sequential stem{nullptr}, layer1{nullptr}, layer2{nullptr}, layer3{nullptr},
      layer4_head{nullptr}, layer4_tail{nullptr};

 private:
  TrunkConfig config_;
};
TORCH_MODULE(ResNetTrunk);

/// Deterministic stand-in for pretrained weights: He-normal convolutions drawn from `seed`,
/// then batch-norm statistics calibrated on procedurally generated images.
ResNetTrunk make_pretrained_trunk(const TrunkConfig& config, std::uint64_t seed);

/// Smooth colour fields with oriented gratings, normalized like encoder inputs.
torch::Tensor calibration_images(int count, int size, std::uint64_t seed);

}  // namespace famix
