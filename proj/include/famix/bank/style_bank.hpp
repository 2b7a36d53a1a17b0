#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "famix/core/types.hpp"

namespace famix {

/// How the bank's styles were produced.
enum class StyleSource : std::uint8_t {
  kPrompt = 0,  // prompt-driven instance normalization
  kNoise = 1,   // SNR perturbation of source statistics
  kSource = 2,  // raw source statistics (class-wise MixStyle support set)
};

/// kClassWise banks are indexed by dominant class; kGlobal banks hold a single list that is
/// sampled for every class.
enum class BankKind : std::uint8_t { kClassWise = 0, kGlobal = 1 };

struct MiningMetadata {
  StyleSource source = StyleSource::kPrompt;
  BankKind kind = BankKind::kClassWise;
  std::string prompt_set_id;
  std::uint32_t pin_steps = 0;
  double pin_step_size = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t patches_m = 0;
  double snr_db = 0.0;

  friend bool operator==(const MiningMetadata&, const MiningMetadata&) = default;
};

struct StyleEntry {
  StyleStats style;
  std::string prompt;
  std::uint64_t source_patch_id = 0;
  double final_cosine_distance = 0.0;
  std::uint32_t iterations = 0;

  friend bool operator==(const StyleEntry&, const StyleEntry&) = default;
};

/// Packs (batch index, patch index within the batch) into a provenance id.
inline std::uint64_t make_patch_id(std::uint64_t batch_index, std::uint64_t local_index) {
  return (batch_index << 32) | (local_index & 0xffffffffULL);
}

/// Class-indexed collection of styles T^(0..K-1). Entries are stored at float32 precision:
/// add() rounds mu/sigma through float so the in-memory bank equals its serialized form.
class StyleBank {
 public:
  StyleBank() = default;
  StyleBank(int channels, std::vector<std::string> class_names, MiningMetadata metadata = {});

  /// Single-key bank used for global (per-map) mining.
  static StyleBank global(int channels, std::string key_name, MiningMetadata metadata = {});

  int channels() const noexcept { return channels_; }
  int num_classes() const noexcept { return static_cast<int>(class_names_.size()); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const MiningMetadata& metadata() const noexcept { return metadata_; }
  MiningMetadata& metadata() noexcept { return metadata_; }
  bool is_global() const noexcept { return metadata_.kind == BankKind::kGlobal; }

  void add(int class_id, StyleEntry entry);
  const std::vector<StyleEntry>& entries(int class_id) const;
  std::size_t size(int class_id) const { return entries(class_id).size(); }
  std::size_t total_entries() const noexcept;

  /// Re-checks every invariant; throws InvalidInputError naming the offending entry.
  void validate() const;

  friend bool operator==(const StyleBank&, const StyleBank&) = default;

 private:
  int channels_ = 0;
  std::vector<std::string> class_names_;
  MiningMetadata metadata_;
  std::vector<std::vector<StyleEntry>> per_class_;
};

/// Rounds a style to float32, keeping sigma >= kEpsilonSigma after rounding.
StyleStats quantize_style(const StyleStats& s);

}  // namespace famix
