#include "famix/nn/seg_model.hpp"

#include <fmt/format.h>

#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

nn::Sequential conv_bn_relu(int in, int out, int kernel, int dilation = 1) {
  return nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, kernel)
                                       .padding(kernel == 3 ? dilation : 0)
                                       .dilation(dilation)
                                       .bias(false)),
                        nn::BatchNorm2d(out), nn::ReLU(nn::ReLUOptions(true)));
}

torch::Tensor resize(const torch::Tensor& x, int64_t h, int64_t w) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

HeadConfig HeadConfig::desk() { return HeadConfig{}; }

HeadConfig HeadConfig::paper() {
  HeadConfig h;
  h.aspp_channels = 256;
  h.atrous_rates = {6, 12, 18};
  h.low_level_channels = 48;
  h.fuse_channels = 256;
  return h;
}

DeepLabHeadImpl::DeepLabHeadImpl(int in_channels, int low_level_in, int num_classes,
                                 const HeadConfig& c) {
  branches_.push_back(register_module("aspp0", conv_bn_relu(in_channels, c.aspp_channels, 1)));
  for (std::size_t i = 0; i < c.atrous_rates.size(); ++i) {
    branches_.push_back(register_module(fmt::format("aspp{}", i + 1),
                                        conv_bn_relu(in_channels, c.aspp_channels, 3, c.atrous_rates[i])));
  }
  // Pooled branch has 1x1 spatial extent, so no batch norm.
  pool_conv_ = register_module("aspp_pool", nn::Conv2d(nn::Conv2dOptions(in_channels, c.aspp_channels, 1)));
  const int cat = c.aspp_channels * static_cast<int>(branches_.size() + 1);
  project_ = register_module("project", conv_bn_relu(cat, c.aspp_channels, 1));
  low_ = register_module("low_level", conv_bn_relu(low_level_in, c.low_level_channels, 1));
  fuse_ = register_module("fuse", conv_bn_relu(c.aspp_channels + c.low_level_channels, c.fuse_channels, 3));
  classifier_ = register_module("classifier", nn::Conv2d(nn::Conv2dOptions(c.fuse_channels, num_classes, 1)));
}

torch::Tensor DeepLabHeadImpl::forward(const torch::Tensor& high, const torch::Tensor& low) {
  std::vector<torch::Tensor> outs;
  for (auto& b : branches_) outs.push_back(b->forward(high));
  auto pooled = torch::relu(pool_conv_->forward(F::adaptive_avg_pool2d(high, F::AdaptiveAvgPool2dFuncOptions(1))));
  outs.push_back(pooled.expand({-1, -1, high.size(2), high.size(3)}));
  auto x = project_->forward(torch::cat(outs, 1));
  x = resize(x, low.size(2), low.size(3));
  x = fuse_->forward(torch::cat({x, low_->forward(low)}, 1));
  return classifier_->forward(x);
}

std::string to_string(ModelGroup g) {
  switch (g) {
    case ModelGroup::kStem: return "stem";
    case ModelGroup::kLayer1: return "layer1";
    case ModelGroup::kLayer2: return "layer2";
    case ModelGroup::kLayer3: return "layer3";
    case ModelGroup::kLayer4: return "layer4";
    case ModelGroup::kLayer4Tail: return "layer4_tail";
    case ModelGroup::kDecoder: return "decoder";
  }
  return "?";
}

SegModelImpl::SegModelImpl(const TrunkConfig& trunk_config, const HeadConfig& head_config,
                           int num_classes, std::uint64_t encoder_seed)
    : num_classes_(num_classes) {
  if (num_classes < 2) throw ConfigError("segmentation needs at least two classes");
  trunk = register_module("trunk", make_pretrained_trunk(trunk_config, encoder_seed));
  head = register_module("head", DeepLabHead(trunk->out_channels(), trunk->layer1_channels(),
                                             num_classes, head_config));
}

torch::Tensor SegModelImpl::forward(const torch::Tensor& images, const Layer1Hook& hook) {
  auto low = trunk->forward_layer1(images);
  if (hook) low = hook(low);
  auto high = trunk->forward_from_layer1(low);
  auto logits = head->forward(high, low);
  return resize(logits, images.size(2), images.size(3));
}

nn::Module& SegModelImpl::group(ModelGroup g) {
  switch (g) {
    case ModelGroup::kStem: return *trunk->stem;
    case ModelGroup::kLayer1: return *trunk->layer1;
    case ModelGroup::kLayer2: return *trunk->layer2;
    case ModelGroup::kLayer3: return *trunk->layer3;
    case ModelGroup::kLayer4: return *trunk->layer4_head;
    case ModelGroup::kLayer4Tail: return *trunk->layer4_tail;
    case ModelGroup::kDecoder: return *head;
  }
  throw InvalidInputError("unknown model group");
}

std::vector<torch::Tensor> SegModelImpl::group_parameters(ModelGroup g) {
  return group(g).parameters();
}

std::vector<torch::Tensor> SegModelImpl::group_state(ModelGroup g) {
  auto out = group(g).parameters();
  for (auto& b : group(g).buffers()) out.push_back(b);
  return out;
}

std::uint64_t SegModelImpl::group_checksum(ModelGroup g) { return tensor_checksum(group_state(g)); }

}  // namespace famix
