#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "famix/nn/seg_model.hpp"

namespace famix {

enum class FreezePreset {
  kFamix,      // layer4 tail + decoder trainable
  kFT,         // everything trainable
  kDP,         // decoder only
  kDPFT,       // DP, then FT
  kL1,         // stem + layer1 frozen
  kL1To2,      // through layer2 frozen
  kL1To3,      // through layer3 frozen
  kL1To4Prime, // through layer4 except its tail frozen (same split as kFamix)
  kL1To4,      // whole trunk frozen (same split as kDP)
};

std::string to_string(FreezePreset p);
/// Accepts FAMIX, FT, DP, DP_FT, L1, L1-2, L1-3, L1-4' (or L1-4p), L1-4.
FreezePreset parse_freeze_preset(const std::string& s);
/// The five points of the frozen-depth sweep, shallow to deep.
std::vector<FreezePreset> freeze_sweep_presets();

class FreezePolicy {
 public:
  /// All groups trainable.
  FreezePolicy();
  static FreezePolicy with_trainable(std::initializer_list<ModelGroup> groups);

  bool trainable(ModelGroup g) const { return trainable_[static_cast<std::size_t>(g)]; }
  std::vector<ModelGroup> trainable_groups() const;
  std::vector<ModelGroup> frozen_groups() const;
  std::string describe() const;
  friend bool operator==(const FreezePolicy&, const FreezePolicy&) = default;

 private:
  std::array<bool, kAllGroups.size()> trainable_;
};

struct FreezePhase {
  std::string name;
  FreezePolicy policy;
  /// Share of the iteration budget.
  double fraction = 1.0;
};

/// One phase for every preset except DP_FT, which yields decoder probing followed by full
/// fine-tuning with `probe_fraction` of the budget in the first phase.
std::vector<FreezePhase> phases_for(FreezePreset preset, double probe_fraction = 0.5);

/// Iteration counts per phase for a budget; they sum to `iterations`.
std::vector<std::int64_t> phase_lengths(const std::vector<FreezePhase>& phases, std::int64_t iterations);

/// Sets requires_grad per group.
void apply_freeze(SegModel& model, const FreezePolicy& policy);
/// Training mode for trainable groups, eval mode (frozen batch-norm statistics) for the rest.
void set_train_mode(SegModel& model, const FreezePolicy& policy);
/// Checksum of every parameter and buffer of the frozen groups.
std::uint64_t frozen_checksum(SegModel& model, const FreezePolicy& policy);

}  // namespace famix
