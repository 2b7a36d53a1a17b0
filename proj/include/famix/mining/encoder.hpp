#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <torch/torch.h>
#include <vector>

#include "famix/nn/backbone.hpp"

namespace famix {

/// Frozen joint image/text embedding model with a visual stem that can be split after
/// Layer1. All tensors are double precision; parameters never require gradients.
class JointEncoder {
 public:
  virtual ~JointEncoder() = default;

  virtual std::string id() const = 0;
  virtual int layer1_channels() const = 0;
  virtual int embed_dim() const = 0;

  /// Normalized images (N x 3 x H x W) to Layer1 features (N x C x h x w).
  virtual torch::Tensor encode_layer1(const torch::Tensor& images) = 0;
  /// Remaining visual stages and projection: N x C x h x w -> N x D (not normalized).
  virtual torch::Tensor embed_from_layer1(const torch::Tensor& layer1) = 0;
  /// Text embedding, shape D (not normalized).
  virtual torch::Tensor embed_text(const std::string& text) = 0;

  virtual std::vector<torch::Tensor> state() const = 0;
};

/// Checksum over every parameter and buffer of the encoder.
std::uint64_t encoder_checksum(const JointEncoder& encoder);

/// Small analytic encoder for gradient checks: pointwise tanh projection, pooled first and
/// second moments, linear map to D. Text embeddings are seeded by a hash of the text.
class StubEncoder final : public JointEncoder {
 public:
  StubEncoder(int channels, int embed_dim, std::uint64_t seed);

  std::string id() const override { return "stub"; }
  int layer1_channels() const override { return channels_; }
  int embed_dim() const override { return embed_dim_; }
  torch::Tensor encode_layer1(const torch::Tensor& images) override;
  torch::Tensor embed_from_layer1(const torch::Tensor& layer1) override;
  torch::Tensor embed_text(const std::string& text) override;
  std::vector<torch::Tensor> state() const override;

 private:
  int channels_;
  int embed_dim_;
  std::uint64_t seed_;
  torch::Tensor lift_, lift_bias_, proj_, stem_;
};

struct TinyClipConfig {
  std::string name = "tiny-clip";
  TrunkConfig trunk = TrunkConfig::desk();
  int embed_dim = 64;
  int text_buckets = 4096;
  int text_width = 64;
};

/// Built-in vision-language encoder: the residual trunk shared with the segmentation
/// backbone (same architecture and seed), global average pooling and a linear projection;
/// the text side embeds hashed words and character trigrams and projects them to the same
/// space.
class TinyClipEncoder final : public JointEncoder {
 public:
  TinyClipEncoder(const TinyClipConfig& config, std::uint64_t seed);

  std::string id() const override;
  int layer1_channels() const override { return trunk_->layer1_channels(); }
  int embed_dim() const override { return config_.embed_dim; }
  torch::Tensor encode_layer1(const torch::Tensor& images) override;
  torch::Tensor embed_from_layer1(const torch::Tensor& layer1) override;
  torch::Tensor embed_text(const std::string& text) override;
  std::vector<torch::Tensor> state() const override;

  const ResNetTrunk& trunk() const { return trunk_; }

 private:
  TinyClipConfig config_;
  std::uint64_t seed_;
  ResNetTrunk trunk_{nullptr};
  torch::Tensor visual_proj_, token_table_, text_proj_;
};

/// Token ids for the hashed text model: lower-cased words plus character trigrams of
/// "<word>", each reduced modulo `buckets`.
std::vector<std::int64_t> hash_tokens(const std::string& text, int buckets);

/// "tiny-clip" (desk trunk), "tiny-clip-paper" (paper trunk) or "stub".
std::unique_ptr<JointEncoder> make_encoder(const std::string& id, std::uint64_t seed);

}  // namespace famix
