#include "famix/mining/encoder.hpp"

#include <cctype>
#include <cmath>
#include <fmt/format.h>

#include "famix/core/random.hpp"
#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

namespace F = torch::nn::functional;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

torch::Tensor seeded_normal(std::initializer_list<int64_t> sizes, std::uint64_t seed, double scale) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::randn(sizes, gen, torch::kFloat64) * scale;
}

void check_layer1(const torch::Tensor& x, int channels) {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw ShapeError(fmt::format("encoder expects N x {} x h x w Layer1 features", channels));
  }
}

}  // namespace

std::uint64_t encoder_checksum(const JointEncoder& encoder) { return tensor_checksum(encoder.state()); }

std::vector<std::int64_t> hash_tokens(const std::string& text, int buckets) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  std::vector<std::int64_t> ids;
  for (const auto& w : words) {
    ids.push_back(static_cast<std::int64_t>(fnv1a("w:" + w) % static_cast<std::uint64_t>(buckets)));
    const std::string padded = "<" + w + ">";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      ids.push_back(static_cast<std::int64_t>(fnv1a("t:" + padded.substr(i, 3)) %
                                              static_cast<std::uint64_t>(buckets)));
    }
  }
  return ids;
}

StubEncoder::StubEncoder(int channels, int embed_dim, std::uint64_t seed)
    : channels_(channels), embed_dim_(embed_dim), seed_(seed) {
  if (channels < 1 || embed_dim < 1) throw ConfigError("stub encoder needs positive sizes");
  const int hidden = 2 * channels;
  lift_ = seeded_normal({hidden, channels}, derive_seed(seed, {1}), 1.0 / std::sqrt(channels));
  lift_bias_ = seeded_normal({hidden}, derive_seed(seed, {2}), 0.1);
  proj_ = seeded_normal({embed_dim, 2 * hidden}, derive_seed(seed, {3}), 1.0 / std::sqrt(2.0 * hidden));
  stem_ = seeded_normal({channels, 3}, derive_seed(seed, {4}), 1.0);
}

torch::Tensor StubEncoder::encode_layer1(const torch::Tensor& images) {
  auto x = torch::einsum("kc,nchw->nkhw", {stem_, images.to(torch::kFloat64)});
  return F::avg_pool2d(x, F::AvgPool2dFuncOptions(4));
}

torch::Tensor StubEncoder::embed_from_layer1(const torch::Tensor& layer1) {
  check_layer1(layer1, channels_);
  auto z = torch::tanh(torch::einsum("kc,nchw->nkhw", {lift_, layer1}) + lift_bias_.view({1, -1, 1, 1}));
  auto pooled = torch::cat({z.mean({2, 3}), (z * z).mean({2, 3})}, 1);
  return torch::matmul(pooled, proj_.t());
}

torch::Tensor StubEncoder::embed_text(const std::string& text) {
  return seeded_normal({embed_dim_}, derive_seed(seed_, {5, fnv1a(text)}), 1.0);
}

std::vector<torch::Tensor> StubEncoder::state() const { return {lift_, lift_bias_, proj_, stem_}; }

TinyClipEncoder::TinyClipEncoder(const TinyClipConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  trunk_ = make_pretrained_trunk(config.trunk, seed);
  trunk_->to(torch::kFloat64);
  trunk_->eval();
  for (auto& p : trunk_->parameters()) p.set_requires_grad(false);
  const int c4 = trunk_->out_channels();
  visual_proj_ = seeded_normal({config.embed_dim, c4}, derive_seed(seed, {101}), 1.0 / std::sqrt(c4));
  token_table_ = seeded_normal({config.text_buckets, config.text_width}, derive_seed(seed, {102}), 1.0);
  text_proj_ = seeded_normal({config.embed_dim, config.text_width}, derive_seed(seed, {103}),
                             1.0 / std::sqrt(config.text_width));
}

std::string TinyClipEncoder::id() const { return config_.name; }

torch::Tensor TinyClipEncoder::encode_layer1(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  return trunk_->forward_layer1(images.to(torch::kFloat64));
}

torch::Tensor TinyClipEncoder::embed_from_layer1(const torch::Tensor& layer1) {
  check_layer1(layer1, layer1_channels());
  auto high = trunk_->forward_from_layer1(layer1);
  return torch::matmul(high.mean({2, 3}), visual_proj_.t());
}

torch::Tensor TinyClipEncoder::embed_text(const std::string& text) {
  const auto ids = hash_tokens(text, config_.text_buckets);
  if (ids.empty()) throw InvalidInputError("cannot embed an empty prompt");
  auto idx = torch::tensor(ids, torch::kInt64);
  auto bag = token_table_.index_select(0, idx).mean(0);
  return torch::matmul(text_proj_, bag);
}

std::vector<torch::Tensor> TinyClipEncoder::state() const {
  auto out = trunk_->parameters();
  for (auto& b : trunk_->buffers()) out.push_back(b);
  out.push_back(visual_proj_);
  out.push_back(token_table_);
  out.push_back(text_proj_);
  return out;
}

std::unique_ptr<JointEncoder> make_encoder(const std::string& id, std::uint64_t seed) {
  if (id == "tiny-clip") return std::make_unique<TinyClipEncoder>(TinyClipConfig{}, seed);
  if (id == "tiny-clip-paper") {
    TinyClipConfig c;
    c.name = id;
    c.trunk = TrunkConfig::paper();
    c.embed_dim = 256;
    c.text_width = 256;
    return std::make_unique<TinyClipEncoder>(c, seed);
  }
  if (id == "stub") return std::make_unique<StubEncoder>(TrunkConfig::desk().widths[0], 32, seed);
  throw ConfigError(fmt::format("unknown encoder '{}' (expected tiny-clip, tiny-clip-paper or stub)", id));
}

}  // namespace famix
