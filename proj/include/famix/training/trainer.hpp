#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <json.hpp>
#include <optional>
#include <string>
#include <torch/torch.h>
#include <vector>

#include "famix/eval/dataset.hpp"
#include "famix/nn/seg_model.hpp"
#include "famix/training/augment.hpp"
#include "famix/training/freeze.hpp"
#include "famix/training/schedule.hpp"
#include "famix/training/transforms.hpp"

namespace famix {

struct ModelConfig {
  TrunkConfig trunk = TrunkConfig::desk();
  HeadConfig head = HeadConfig::desk();
  int num_classes = 4;
  /// Seed of the pretrained trunk; must match the encoder used for mining.
  std::uint64_t encoder_seed = 0;
};

/// Builds the segmentation network. Decoder initialization is drawn from `init_seed`.
SegModel build_model(const ModelConfig& config, std::uint64_t init_seed);

struct TrainConfig {
  std::int64_t iterations = 300;
  int batch_size = 8;
  double lr_decoder = 0.1;
  double lr_backbone = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double power = 0.9;
  int m = 16;
  std::uint64_t seed = 0;
  AugmentMode mode;
  FreezePreset freeze = FreezePreset::kFamix;
  double probe_fraction = 0.5;
  bool jitter_enabled = true;
  JitterOptions jitter;
  int ignore_index = kDefaultIgnoreIndex;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Mean cross-entropy over pixels whose target is not `ignore_index`. logits N x K x H x W,
/// target N x H x W (int64).
torch::Tensor pixel_cross_entropy(const torch::Tensor& logits, const torch::Tensor& target, int ignore_index);

struct StepRecord {
  std::int64_t iteration = 0;
  std::string phase;
  double loss = 0.0;
  double lr_decoder = 0.0;
  double lr_backbone = 0.0;
  RandomizationPlan plan;

  /// One log line: iter, phase, loss, lr_decoder, lr_backbone, alpha, applied, restyled and,
  /// for MixStyle, the pairing permutation.
  nlohmann::json to_json() const;
};

struct PhaseSpan {
  FreezePhase phase;
  std::int64_t start = 0;
  std::int64_t length = 0;
};

/// Minimal fine-tuning loop with Layer1 style randomization. Iteration t of the run
/// determines its batch, augmentation and randomization draws, so a resumed run retraces an
/// uninterrupted one.
class Trainer {
 public:
  Trainer(SegModel model, TrainConfig config, StyleSets sets);

  /// Validates the config against the style sets, then runs iterations until the budget (or
  /// `stop_at`) is reached.
  void run(const std::vector<Sample>& data, const std::function<void(const StepRecord&)>& on_step = {},
           std::optional<std::int64_t> stop_at = std::nullopt);

  /// Samples, augments and trains on the batch of the current iteration.
  StepRecord step(const std::vector<Sample>& data);

  /// One update on an explicit batch: images normalized N x 3 x H x W, labels at image size.
  StepRecord train_step(const torch::Tensor& images, const std::vector<LabelMap>& labels);

  /// Writes model.pt, optim.pt and meta.json (iteration, phase partition, frozen checksum).
  void save_checkpoint(const std::filesystem::path& dir);
  /// Restores model and optimizer state written by save_checkpoint for the same config.
  void load_checkpoint(const std::filesystem::path& dir);

  std::int64_t iteration() const { return iteration_; }
  const std::vector<PhaseSpan>& phases() const { return phases_; }
  const PhaseSpan& current_phase() const { return phases_.at(phase_index_); }
  const TrainConfig& config() const { return config_; }
  SegModel& model() { return model_; }

 private:
  void enter_phase(std::size_t index);
  std::size_t phase_for(std::int64_t iteration) const;

  SegModel model_;
  TrainConfig config_;
  StyleSets sets_;
  std::vector<PhaseSpan> phases_;
  std::size_t phase_index_ = 0;
  std::int64_t iteration_ = 0;
  std::unique_ptr<torch::optim::SGD> optimizer_;
  // Index into the optimizer's param groups; -1 when the group is empty in this phase.
  int decoder_group_ = -1;
  int backbone_group_ = -1;
};

/// Throws ConfigError when the mode needs a style set that was not provided.
void check_style_sets(const AugmentMode& mode, const StyleSets& sets);

}  // namespace famix
