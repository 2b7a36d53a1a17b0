#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "famix/bank/prompt_set.hpp"
#include "famix/bank/style_bank.hpp"
#include "famix/core/types.hpp"
#include "famix/mining/encoder.hpp"
#include "famix/mining/pin.hpp"

namespace famix {

/// Layer1 features of one batch with their aligned label maps.
struct FeatureBatch {
  std::vector<FeatureMap> features;
  std::vector<LabelMap> labels;
};

/// Class id -> index of the first patch (in the given order) whose dominant class it is.
/// All-ignore patches are skipped.
std::map<int, std::size_t> select_balanced_patches(std::span<const LabelMap> label_patches);

struct MiningOptions {
  int m = 16;
  PinOptions pin;
  std::uint64_t seed = 0;
  PromptConstruction construction = PromptConstruction::kStyleAndClass;
  /// Threads running PIN on the selected patches of a batch. Results do not depend on it.
  int workers = 1;
};

struct MinedRecord {
  std::uint64_t batch = 0;
  std::uint64_t patch_id = 0;
  int class_id = 0;
  PinResult pin;
};

/// Local (class-wise) or global style mining over a stream of batches.
class StyleMiner {
 public:
  /// Class-wise mining; one bank list per class name.
  StyleMiner(JointEncoder& encoder, PromptSet prompts, std::vector<std::string> class_names,
             MiningOptions options);
  /// Global mining: one style per feature map, prompts "<fragment> style driving", single key.
  static StyleMiner global(JointEncoder& encoder, PromptSet prompts, MiningOptions options);

  /// Mines one batch and returns the number of entries added.
  std::size_t mine_batch(const FeatureBatch& batch, std::uint64_t batch_index);

  const StyleBank& bank() const { return bank_; }
  const std::vector<MinedRecord>& records() const { return records_; }

 private:
  struct Job {
    FeatureMap patch;
    int class_id;
    std::uint64_t patch_id;
    PromptSpec prompt;
  };
  StyleMiner(JointEncoder& encoder, PromptSet prompts, std::vector<std::string> class_names,
             MiningOptions options, bool global);
  std::size_t run_jobs(std::vector<Job> jobs, std::uint64_t batch_index);
  std::string sample_fragment(std::uint64_t batch_index, std::uint64_t local_index) const;

  JointEncoder& encoder_;
  PromptSet prompts_;
  std::vector<std::string> class_names_;
  MiningOptions options_;
  bool global_;
  StyleBank bank_;
  std::vector<MinedRecord> records_;
};

StyleBank mine_style_banks(std::span<const FeatureBatch> batches, const PromptSet& prompts,
                           const std::vector<std::string>& class_names, JointEncoder& encoder,
                           const MiningOptions& options);
StyleBank mine_global(std::span<const FeatureBatch> batches, const PromptSet& prompts,
                      JointEncoder& encoder, const MiningOptions& options);

/// Noise counterpart of class-wise mining: the same balanced patch selection, but each
/// selected patch's own style is perturbed at `snr_db` instead of optimized against a prompt.
StyleBank mine_noise_bank(std::span<const FeatureBatch> batches, const std::vector<std::string>& class_names,
                          int m, double snr_db, std::uint64_t seed);

/// Global bank key and prompt word.
inline constexpr const char* kGlobalStyleKey = "driving";

}  // namespace famix
