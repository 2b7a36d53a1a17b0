#include "famix/nn/backbone.hpp"

#include <cmath>
#include <fmt/format.h>

#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

namespace nn = torch::nn;

namespace {

void push_conv_bn_relu(nn::Sequential& seq, int in, int out, int stride) {
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)));
  seq->push_back(nn::BatchNorm2d(out));
  seq->push_back(nn::ReLU(nn::ReLUOptions(true)));
}

nn::Sequential make_stage(int in, int out, int blocks, int stride, int dilation) {
  nn::Sequential stage;
  for (int b = 0; b < blocks; ++b) {
    stage->push_back(BasicBlock(b == 0 ? in : out, out, b == 0 ? stride : 1, dilation));
  }
  return stage;
}

}  // namespace

TrunkConfig TrunkConfig::desk() { return TrunkConfig{}; }

TrunkConfig TrunkConfig::paper() {
  TrunkConfig c;
  c.stem_width = 64;
  c.widths = {64, 128, 256, 512};
  c.blocks = {2, 2, 2, 2};
  return c;
}

void TrunkConfig::validate() const {
  if (stem_width < 2) throw ConfigError("trunk: stem_width must be >= 2");
  for (int i = 0; i < 4; ++i) {
    if (widths[i] < 1 || blocks[i] < 1) {
      throw ConfigError(fmt::format("trunk: stage {} needs positive width and depth", i + 1));
    }
  }
  if (tail_blocks < 1 || tail_blocks >= blocks[3]) {
    throw ConfigError(fmt::format("trunk: tail_blocks {} must be in [1, {})", tail_blocks, blocks[3]));
  }
  if (output_stride != 16 && output_stride != 8) {
    throw ConfigError(fmt::format("trunk: output_stride {} (expected 8 or 16)", output_stride));
  }
}

BasicBlockImpl::BasicBlockImpl(int in_channels, int out_channels, int stride, int dilation) {
  conv1_ = register_module(
      "conv1", nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 3)
                              .stride(stride)
                              .padding(dilation)
                              .dilation(dilation)
                              .bias(false)));
  bn1_ = register_module("bn1", nn::BatchNorm2d(out_channels));
  conv2_ = register_module(
      "conv2", nn::Conv2d(nn::Conv2dOptions(out_channels, out_channels, 3)
                              .padding(dilation)
                              .dilation(dilation)
                              .bias(false)));
  bn2_ = register_module("bn2", nn::BatchNorm2d(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    downsample_ = register_module(
        "downsample",
        nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 1).stride(stride).bias(false)),
                       nn::BatchNorm2d(out_channels)));
  }
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
  auto out = torch::relu(bn1_->forward(conv1_->forward(x)));
  out = bn2_->forward(conv2_->forward(out));
  auto identity = downsample_ ? downsample_->forward(x) : x;
  return torch::relu(out + identity);
}

ResNetTrunkImpl::ResNetTrunkImpl(const TrunkConfig& config) : config_(config) {
  config_.validate();
  const int half = config.stem_width / 2;
  nn::Sequential s;
  push_conv_bn_relu(s, 3, half, 2);
  push_conv_bn_relu(s, half, half, 1);
  push_conv_bn_relu(s, half, config.stem_width, 1);
  s->push_back(nn::AvgPool2d(nn::AvgPool2dOptions(2)));
  stem = register_module("stem", s);
  const auto& w = config.widths;
  const auto& b = config.blocks;
  const bool os8 = config.output_stride == 8;
  layer1 = register_module("layer1", make_stage(config.stem_width, w[0], b[0], 1, 1));
  layer2 = register_module("layer2", make_stage(w[0], w[1], b[1], 2, 1));
  layer3 = register_module("layer3", make_stage(w[1], w[2], b[2], os8 ? 1 : 2, os8 ? 2 : 1));
  const int dil4 = os8 ? 4 : 2;
  const int head_blocks = b[3] - config.tail_blocks;
  layer4_head = register_module("layer4_head", make_stage(w[2], w[3], head_blocks, 1, dil4));
  layer4_tail = register_module("layer4_tail", make_stage(w[3], w[3], config.tail_blocks, 1, dil4));
}

torch::Tensor ResNetTrunkImpl::forward_layer1(const torch::Tensor& images) {
  return layer1->forward(stem->forward(images));
}

torch::Tensor ResNetTrunkImpl::forward_from_layer1(const torch::Tensor& l1) {
  auto x = layer2->forward(l1);
  x = layer3->forward(x);
  x = layer4_head->forward(x);
  return layer4_tail->forward(x);
}

torch::Tensor calibration_images(int count, int size, std::uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  const auto opts = torch::TensorOptions().dtype(torch::kFloat32);
  // Low-frequency colour field: a 4x4 random grid bilinearly upsampled.
  auto coarse = torch::rand({count, 3, 4, 4}, gen, opts);
  auto field = torch::nn::functional::interpolate(
      coarse, torch::nn::functional::InterpolateFuncOptions()
                  .size(std::vector<int64_t>{size, size})
                  .mode(torch::kBilinear)
                  .align_corners(false));
  // Oriented grating with random period and phase per image.
  auto ys = torch::arange(size, opts).view({1, 1, size, 1});
  auto xs = torch::arange(size, opts).view({1, 1, 1, size});
  auto theta = torch::rand({count, 1, 1, 1}, gen, opts) * M_PI;
  auto period = torch::rand({count, 1, 1, 1}, gen, opts) * 10.0 + 3.0;
  auto phase = torch::rand({count, 1, 1, 1}, gen, opts) * 2.0 * M_PI;
  auto amp = torch::rand({count, 1, 1, 1}, gen, opts) * 0.3;
  auto grating = torch::sin((xs * torch::cos(theta) + ys * torch::sin(theta)) * (2.0 * M_PI) / period + phase);
  auto noise = torch::randn({count, 3, size, size}, gen, opts) * 0.03;
  auto rgb = (field + amp * grating + noise).clamp(0.0, 1.0);
  return normalize_rgb(rgb);
}

ResNetTrunk make_pretrained_trunk(const TrunkConfig& config, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  ResNetTrunk trunk(config);
  auto gen = at::detail::createCPUGenerator(seed);
  for (auto& m : trunk->modules(/*include_self=*/false)) {
    if (auto* conv = m->as<nn::Conv2d>()) {
      auto& w = conv->weight;
      const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
      w.copy_(torch::randn(w.sizes(), gen) * std::sqrt(2.0 / fan_in));
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      bn->weight.fill_(1.0);
      bn->bias.zero_();
    }
  }
  // Cumulative-average running statistics over a fixed calibration set.
  for (auto& m : trunk->modules(false)) {
    if (auto* bn = m->as<nn::BatchNorm2d>()) {
      bn->options.momentum(std::nullopt);
      bn->reset_running_stats();
    }
  }
  trunk->train();
  for (int b = 0; b < 4; ++b) {
    trunk->forward(calibration_images(16, 64, seed ^ (0x9e3779b97f4a7c15ULL + b)));
  }
  for (auto& m : trunk->modules(false)) {
    if (auto* bn = m->as<nn::BatchNorm2d>()) bn->options.momentum(0.1);
  }
  trunk->eval();
  return trunk;
}

}  // namespace famix
