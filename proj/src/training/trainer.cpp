#include "famix/training/trainer.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>

#include "famix/core/random.hpp"
#include "famix/core/style_ops.hpp"
#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

namespace fs = std::filesystem;
using nlohmann::json;

SegModel build_model(const ModelConfig& config, std::uint64_t init_seed) {
  torch::manual_seed(init_seed);
  return SegModel(config.trunk, config.head, config.num_classes, config.encoder_seed);
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(fmt::format("{}: {}", field, why));
  };
  if (iterations <= 0) fail("iterations", "must be positive");
  if (batch_size <= 0) fail("batch_size", "must be positive");
  if (!(lr_decoder >= 0.0) || !std::isfinite(lr_decoder)) fail("lr_decoder", "must be finite and >= 0");
  if (!(lr_backbone >= 0.0) || !std::isfinite(lr_backbone)) fail("lr_backbone", "must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay", "must be >= 0");
  if (!(power > 0.0)) fail("power", "must be positive");
  grid_side_for(m);
  if (freeze == FreezePreset::kDPFT && !(probe_fraction > 0.0 && probe_fraction < 1.0)) {
    fail("probe_fraction", "must be in (0, 1)");
  }
  for (double s : {jitter.brightness, jitter.contrast, jitter.saturation}) {
    if (!(s >= 0.0 && s < 1.0)) fail("jitter", "strengths must be in [0, 1)");
  }
  if (jitter.crop < 0) fail("crop", "must be >= 0");
  mode.validate();
}

json TrainConfig::to_json() const {
  return json{{"iterations", iterations},
              {"batch_size", batch_size},
              {"lr_decoder", lr_decoder},
              {"lr_backbone", lr_backbone},
              {"momentum", momentum},
              {"weight_decay", weight_decay},
              {"power", power},
              {"m", m},
              {"seed", seed},
              {"mode", mode.describe()},
              {"mix_probability", mode.probability},
              {"alpha_shape", mode.alpha_shape == MixWeight::Shape::kScalar ? "scalar" : "per_channel"},
              {"freeze", to_string(freeze)},
              {"probe_fraction", probe_fraction},
              {"jitter", jitter_enabled},
              {"crop", jitter.crop},
              {"ignore_index", ignore_index}};
}

torch::Tensor pixel_cross_entropy(const torch::Tensor& logits, const torch::Tensor& target, int ignore_index) {
  if (logits.dim() != 4 || target.dim() != 3 || logits.size(0) != target.size(0) ||
      logits.size(2) != target.size(1) || logits.size(3) != target.size(2)) {
    throw ShapeError(c10::str("logits ", logits.sizes(), " do not match targets ", target.sizes()));
  }
  namespace F = torch::nn::functional;
  return F::cross_entropy(logits, target, F::CrossEntropyFuncOptions().ignore_index(ignore_index));
}

json StepRecord::to_json() const {
  json alpha = nullptr;
  if (plan.alpha) {
    alpha = plan.alpha->shape == MixWeight::Shape::kScalar ? json(plan.alpha->values.at(0))
                                                           : json(plan.alpha->values);
  }
  json j{{"iter", iteration},   {"phase", phase},     {"loss", loss},
         {"lr_decoder", lr_decoder}, {"lr_backbone", lr_backbone}, {"alpha", alpha},
         {"applied", plan.applied}, {"restyled", plan.restyled_patches()}};
  if (!plan.permutation.empty()) j["permutation"] = plan.permutation;
  return j;
}

void check_style_sets(const AugmentMode& mode, const StyleSets& sets) {
  if (mode.needs_mined_bank() && !sets.mined) {
    throw ConfigError(fmt::format("mode '{}' needs a mined style bank (bank path)", mode.describe()));
  }
  if (mode.needs_source_styles() && !sets.source) {
    throw ConfigError(fmt::format("mode '{}' needs source styles", mode.describe()));
  }
  if (mode.locality == Locality::kGlobal && sets.mined && !sets.mined->is_global()) {
    throw ConfigError("locality=global needs a globally mined bank");
  }
  if (mode.needs_mined_bank() && sets.mined) {
    const auto& md = sets.mined->metadata();
    if (mode.variant == AugmentVariant::kLanguage && md.source != StyleSource::kPrompt) {
      throw ConfigError("augment=language needs a prompt-mined bank");
    }
    if (mode.variant == AugmentVariant::kNoise &&
        (md.source != StyleSource::kNoise || md.snr_db != mode.snr_db)) {
      throw ConfigError(fmt::format("augment=noise(snr_db={}) needs a noise bank mined at that SNR", mode.snr_db));
    }
  }
  if (mode.locality == Locality::kLocal && mode.needs_mined_bank() && sets.mined && sets.mined->is_global()) {
    throw ConfigError("locality=local needs a class-wise bank, got a global one");
  }
}

Trainer::Trainer(SegModel model, TrainConfig config, StyleSets sets)
    : model_(std::move(model)), config_(std::move(config)), sets_(sets) {
  config_.validate();
  check_style_sets(config_.mode, sets_);
  for (const StyleBank* b : {sets_.mined, sets_.source}) {
    if (!b) continue;
    if (b->channels() != model_->trunk->layer1_channels()) {
      throw ShapeError(fmt::format("style bank has {} channels, Layer1 has {}", b->channels(),
                                   model_->trunk->layer1_channels()));
    }
    if (!b->is_global() && b->num_classes() != model_->num_classes()) {
      throw ConfigError(fmt::format("style bank has {} classes, model {}", b->num_classes(), model_->num_classes()));
    }
  }
  const auto phases = phases_for(config_.freeze, config_.probe_fraction);
  const auto lengths = phase_lengths(phases, config_.iterations);
  std::int64_t start = 0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (lengths[i] <= 0) throw ConfigError(fmt::format("phase {} gets no iterations", phases[i].name));
    phases_.push_back({phases[i], start, lengths[i]});
    start += lengths[i];
  }
  enter_phase(0);
}

std::size_t Trainer::phase_for(std::int64_t iteration) const {
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    if (iteration < phases_[i].start + phases_[i].length) return i;
  }
  return phases_.size() - 1;
}

void Trainer::enter_phase(std::size_t index) {
  phase_index_ = index;
  const auto& policy = phases_[index].phase.policy;
  apply_freeze(model_, policy);
  std::vector<torch::Tensor> decoder, backbone;
  for (auto g : policy.trainable_groups()) {
    auto params = model_->group_parameters(g);
    auto& dst = g == ModelGroup::kDecoder ? decoder : backbone;
    dst.insert(dst.end(), params.begin(), params.end());
  }
  auto options = torch::optim::SGDOptions(config_.lr_decoder)
                     .momentum(config_.momentum)
                     .weight_decay(config_.weight_decay);
  std::vector<torch::optim::OptimizerParamGroup> groups;
  decoder_group_ = backbone_group_ = -1;
  if (!decoder.empty()) {
    decoder_group_ = static_cast<int>(groups.size());
    groups.emplace_back(decoder, std::make_unique<torch::optim::SGDOptions>(options));
  }
  if (!backbone.empty()) {
    backbone_group_ = static_cast<int>(groups.size());
    auto o = options;
    o.lr(config_.lr_backbone);
    groups.emplace_back(backbone, std::make_unique<torch::optim::SGDOptions>(o));
  }
  optimizer_ = std::make_unique<torch::optim::SGD>(std::move(groups), options);
}

StepRecord Trainer::train_step(const torch::Tensor& images, const std::vector<LabelMap>& labels) {
  if (iteration_ >= config_.iterations) {
    throw ConfigError(fmt::format("iteration budget {} exhausted", config_.iterations));
  }
  if (images.size(0) != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError(fmt::format("{} images but {} label maps", images.size(0), labels.size()));
  }
  const std::size_t p = phase_for(iteration_);
  if (p != phase_index_) enter_phase(p);
  const auto& span = phases_[phase_index_];

  StepRecord rec;
  rec.iteration = iteration_;
  rec.phase = span.phase.name;
  const std::int64_t local = iteration_ - span.start;
  rec.lr_decoder = PolySchedule{config_.lr_decoder, span.length, config_.power}.at(local);
  rec.lr_backbone =
      backbone_group_ >= 0 ? PolySchedule{config_.lr_backbone, span.length, config_.power}.at(local) : 0.0;
  auto& groups = optimizer_->param_groups();
  if (decoder_group_ >= 0) static_cast<torch::optim::SGDOptions&>(groups[decoder_group_].options()).lr(rec.lr_decoder);
  if (backbone_group_ >= 0) {
    static_cast<torch::optim::SGDOptions&>(groups[backbone_group_].options()).lr(rec.lr_backbone);
  }

  set_train_mode(model_, span.phase.policy);
  Layer1Hook hook;
  if (!config_.mode.passthrough()) {
    const RandomizeOptions ro{config_.m, derive_seed(config_.seed, {12, static_cast<std::uint64_t>(iteration_)}),
                              std::nullopt};
    hook = [this, ro, &labels, &rec](const torch::Tensor& l1) {
      return randomize_tensor(l1, labels, sets_, config_.mode, ro, &rec.plan);
    };
  }
  std::vector<const LabelMap*> lp;
  for (const auto& l : labels) lp.push_back(&l);
  auto logits = model_->forward(images, hook);
  auto loss = pixel_cross_entropy(logits, labels_to_tensor(lp), config_.ignore_index);
  rec.loss = loss.item<double>();
  if (!std::isfinite(rec.loss)) {
    throw DivergenceError(iteration_, fmt::format("non-finite loss {} at iteration {}", rec.loss, iteration_));
  }
  optimizer_->zero_grad();
  loss.backward();
  optimizer_->step();
  ++iteration_;
  return rec;
}

StepRecord Trainer::step(const std::vector<Sample>& data) {
  const auto t = static_cast<std::uint64_t>(iteration_);
  const auto idx = batch_indices(data.size(), config_.batch_size, iteration_, derive_seed(config_.seed, {10}));
  std::vector<Sample> batch;
  batch.reserve(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (config_.jitter_enabled) {
      Rng rng(derive_seed(config_.seed, {11, t, b}));
      batch.push_back(augment_sample(data[idx[b]], config_.jitter, rng));
    } else {
      batch.push_back(data[idx[b]]);
    }
  }
  std::vector<const RgbImage*> images;
  std::vector<LabelMap> labels;
  for (const auto& s : batch) {
    images.push_back(&s.image);
    labels.push_back(s.labels);
  }
  return train_step(normalize_rgb(images_to_tensor(images)), labels);
}

void Trainer::run(const std::vector<Sample>& data, const std::function<void(const StepRecord&)>& on_step,
                  std::optional<std::int64_t> stop_at) {
  if (data.empty()) throw InvalidInputError("training set is empty");
  const std::int64_t end = std::min(stop_at.value_or(config_.iterations), config_.iterations);
  while (iteration_ < end) {
    const auto rec = step(data);
    if (on_step) on_step(rec);
  }
}

void Trainer::save_checkpoint(const fs::path& dir) {
  // A checkpoint on a phase boundary already carries the next phase's optimizer.
  if (const auto p = phase_for(iteration_); p != phase_index_) enter_phase(p);
  fs::create_directories(dir);
  torch::save(model_, (dir / "model.pt").string());
  torch::save(*optimizer_, (dir / "optim.pt").string());
  json phases = json::array();
  for (const auto& s : phases_) {
    json trainable = json::array(), frozen = json::array();
    for (auto g : s.phase.policy.trainable_groups()) trainable.push_back(to_string(g));
    for (auto g : s.phase.policy.frozen_groups()) frozen.push_back(to_string(g));
    phases.push_back({{"name", s.phase.name}, {"start", s.start}, {"length", s.length},
                      {"trainable", trainable}, {"frozen", frozen}});
  }
  const json meta{{"iteration", iteration_},
                  {"phase", current_phase().phase.name},
                  {"phases", phases},
                  {"frozen_checksum", fmt::format("{:016x}", frozen_checksum(model_, current_phase().phase.policy))},
                  {"config", config_.to_json()}};
  std::ofstream out(dir / "meta.json");
  if (!out) throw IoError(fmt::format("cannot write {}", (dir / "meta.json").string()));
  out << meta.dump(2) << "\n";
}

void Trainer::load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw LoadError(fmt::format("{}: missing meta.json", dir.string()));
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("{}: meta.json: {}", dir.string(), e.what()));
  }
  if (meta.value("config", json()) != config_.to_json()) {
    throw ConfigError(fmt::format("{}: checkpoint was written with a different training config", dir.string()));
  }
  try {
    torch::load(model_, (dir / "model.pt").string());
    iteration_ = meta.at("iteration").get<std::int64_t>();
    enter_phase(phase_for(iteration_));
    torch::load(*optimizer_, (dir / "optim.pt").string());
  } catch (const c10::Error& e) {
    throw LoadError(fmt::format("{}: {}", dir.string(), e.what_without_backtrace()));
  }
  const auto expected = meta.value("frozen_checksum", std::string());
  if (fmt::format("{:016x}", frozen_checksum(model_, current_phase().phase.policy)) != expected) {
    throw LoadError(fmt::format("{}: frozen-parameter checksum mismatch", dir.string()));
  }
}

}  // namespace famix
