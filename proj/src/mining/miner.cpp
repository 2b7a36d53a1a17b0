#include "famix/mining/miner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fmt/format.h>
#include <thread>

#include "famix/core/random.hpp"
#include "famix/core/style_ops.hpp"
#include "famix/error.hpp"

namespace famix {

std::map<int, std::size_t> select_balanced_patches(std::span<const LabelMap> label_patches) {
  std::map<int, std::size_t> chosen;
  for (std::size_t i = 0; i < label_patches.size(); ++i) {
    if (const auto cls = dominant_class(label_patches[i])) chosen.try_emplace(*cls, i);
  }
  return chosen;
}

StyleMiner::StyleMiner(JointEncoder& encoder, PromptSet prompts, std::vector<std::string> class_names,
                       MiningOptions options)
    : StyleMiner(encoder, std::move(prompts), std::move(class_names), options, false) {}

StyleMiner StyleMiner::global(JointEncoder& encoder, PromptSet prompts, MiningOptions options) {
  return StyleMiner(encoder, std::move(prompts), {kGlobalStyleKey}, options, true);
}

StyleMiner::StyleMiner(JointEncoder& encoder, PromptSet prompts, std::vector<std::string> class_names,
                       MiningOptions options, bool global)
    : encoder_(encoder),
      prompts_(std::move(prompts)),
      class_names_(std::move(class_names)),
      options_(options),
      global_(global) {
  if (prompts_.entries.empty()) throw ConfigError("mining needs a non-empty prompt set");
  prompts_.validate();
  if (options_.pin.steps < 0) throw DomainError("PIN steps must be >= 0");
  if (options_.workers < 1) throw ConfigError("mining workers must be >= 1");
  if (!global_) grid_side_for(options_.m);
  MiningMetadata md;
  md.source = StyleSource::kPrompt;
  md.kind = global_ ? BankKind::kGlobal : BankKind::kClassWise;
  md.prompt_set_id = prompts_.id;
  md.pin_steps = static_cast<std::uint32_t>(options_.pin.steps);
  md.pin_step_size = options_.pin.step_size;
  md.seed = options_.seed;
  md.patches_m = global_ ? 1u : static_cast<std::uint32_t>(options_.m);
  bank_ = global_ ? StyleBank::global(encoder.layer1_channels(), class_names_.front(), md)
                  : StyleBank(encoder.layer1_channels(), class_names_, md);
}

std::string StyleMiner::sample_fragment(std::uint64_t batch_index, std::uint64_t local_index) const {
  Rng rng(derive_seed(options_.seed, {batch_index, local_index}));
  std::uniform_int_distribution<std::size_t> pick(0, prompts_.entries.size() - 1);
  return prompts_.entries[pick(rng)];
}

std::size_t StyleMiner::mine_batch(const FeatureBatch& batch, std::uint64_t batch_index) {
  if (batch.features.size() != batch.labels.size()) {
    throw ShapeError(fmt::format("{} feature maps but {} label maps", batch.features.size(),
                                 batch.labels.size()));
  }
  std::vector<Job> jobs;
  if (global_) {
    for (std::size_t n = 0; n < batch.features.size(); ++n) {
      const auto fragment = sample_fragment(batch_index, n);
      jobs.push_back({batch.features[n], 0, make_patch_id(batch_index, n),
                      make_prompt(fragment, kGlobalStyleKey, PromptConstruction::kStyleAndClass)});
    }
    return run_jobs(std::move(jobs), batch_index);
  }

  // Patches in batch order: sample n, then row-major grid position.
  std::vector<FeatureMap> patches;
  std::vector<LabelMap> label_patches;
  for (std::size_t n = 0; n < batch.features.size(); ++n) {
    const auto& f = batch.features[n];
    if (f.channels() != bank_.channels()) {
      throw ShapeError(fmt::format("feature map has {} channels, bank {}", f.channels(), bank_.channels()));
    }
    auto grid = partition(f, options_.m);
    auto lp = partition_labels(batch.labels[n], options_.m, f.height(), f.width());
    for (auto& p : grid.patches()) patches.push_back(p);
    for (auto& l : lp) label_patches.push_back(std::move(l));
  }
  for (const auto& [cls, idx] : select_balanced_patches(label_patches)) {
    if (cls < 0 || cls >= static_cast<int>(class_names_.size())) {
      throw InvalidInputError(fmt::format("label {} outside the {} class names", cls, class_names_.size()));
    }
    const auto fragment = sample_fragment(batch_index, idx);
    jobs.push_back({patches[idx], cls, make_patch_id(batch_index, idx),
                    make_prompt(fragment, class_names_[static_cast<std::size_t>(cls)], options_.construction)});
  }
  return run_jobs(std::move(jobs), batch_index);
}

std::size_t StyleMiner::run_jobs(std::vector<Job> jobs, std::uint64_t batch_index) {
  std::vector<PinResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = pin_optimize(jobs[i].patch, jobs[i].prompt, encoder_, options_.pin);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(options_.workers, static_cast<int>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  // Appends follow job order (class id for local mining, map index for global mining).
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = results[i];
    bank_.add(jobs[i].class_id, StyleEntry{r.style, r.prompt.rendered, jobs[i].patch_id,
                                           r.final_cosine_distance,
                                           static_cast<std::uint32_t>(r.iterations_run)});
    records_.push_back({batch_index, jobs[i].patch_id, jobs[i].class_id, r});
  }
  return jobs.size();
}

StyleBank mine_style_banks(std::span<const FeatureBatch> batches, const PromptSet& prompts,
                           const std::vector<std::string>& class_names, JointEncoder& encoder,
                           const MiningOptions& options) {
  StyleMiner miner(encoder, prompts, class_names, options);
  for (std::size_t b = 0; b < batches.size(); ++b) miner.mine_batch(batches[b], b);
  return miner.bank();
}

StyleBank mine_global(std::span<const FeatureBatch> batches, const PromptSet& prompts,
                      JointEncoder& encoder, const MiningOptions& options) {
  auto miner = StyleMiner::global(encoder, prompts, options);
  for (std::size_t b = 0; b < batches.size(); ++b) miner.mine_batch(batches[b], b);
  return miner.bank();
}

StyleBank mine_noise_bank(std::span<const FeatureBatch> batches, const std::vector<std::string>& class_names,
                          int m, double snr_db, std::uint64_t seed) {
  if (batches.empty() || batches.front().features.empty()) {
    throw InvalidInputError("noise mining needs at least one feature map");
  }
  MiningMetadata md;
  md.source = StyleSource::kNoise;
  md.seed = seed;
  md.patches_m = static_cast<std::uint32_t>(m);
  md.snr_db = snr_db;
  StyleBank bank(batches.front().features.front().channels(), class_names, md);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    if (batch.features.size() != batch.labels.size()) {
      throw ShapeError(fmt::format("{} feature maps but {} label maps", batch.features.size(), batch.labels.size()));
    }
    std::vector<FeatureMap> patches;
    std::vector<LabelMap> label_patches;
    for (std::size_t n = 0; n < batch.features.size(); ++n) {
      const auto& f = batch.features[n];
      const auto grid = partition(f, m);
      patches.insert(patches.end(), grid.patches().begin(), grid.patches().end());
      for (auto& l : partition_labels(batch.labels[n], m, f.height(), f.width())) label_patches.push_back(std::move(l));
    }
    for (const auto& [cls, idx] : select_balanced_patches(label_patches)) {
      if (cls >= static_cast<int>(class_names.size())) {
        throw InvalidInputError(fmt::format("label {} outside the {} class names", cls, class_names.size()));
      }
      Rng rng(derive_seed(seed, {b, idx}));
      bank.add(cls, StyleEntry{perturb_with_snr(channel_stats(patches[idx]), snr_db, rng), "",
                               make_patch_id(b, idx), 0.0, 0});
    }
  }
  return bank;
}

}  // namespace famix
