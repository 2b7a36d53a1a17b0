#include "famix/training/freeze.hpp"

#include <cmath>
#include <fmt/format.h>

#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

std::string to_string(FreezePreset p) {
  switch (p) {
    case FreezePreset::kFamix: return "FAMIX";
    case FreezePreset::kFT: return "FT";
    case FreezePreset::kDP: return "DP";
    case FreezePreset::kDPFT: return "DP_FT";
    case FreezePreset::kL1: return "L1";
    case FreezePreset::kL1To2: return "L1-2";
    case FreezePreset::kL1To3: return "L1-3";
    case FreezePreset::kL1To4Prime: return "L1-4'";
    case FreezePreset::kL1To4: return "L1-4";
  }
  return "?";
}

FreezePreset parse_freeze_preset(const std::string& s) {
  if (s == "FAMIX") return FreezePreset::kFamix;
  if (s == "FT") return FreezePreset::kFT;
  if (s == "DP") return FreezePreset::kDP;
  if (s == "DP_FT") return FreezePreset::kDPFT;
  if (s == "L1") return FreezePreset::kL1;
  if (s == "L1-2") return FreezePreset::kL1To2;
  if (s == "L1-3") return FreezePreset::kL1To3;
  if (s == "L1-4'" || s == "L1-4p") return FreezePreset::kL1To4Prime;
  if (s == "L1-4") return FreezePreset::kL1To4;
  throw ConfigError(fmt::format(
      "unknown freeze preset '{}' (expected FAMIX, FT, DP, DP_FT, L1, L1-2, L1-3, L1-4' or L1-4)", s));
}

std::vector<FreezePreset> freeze_sweep_presets() {
  return {FreezePreset::kL1, FreezePreset::kL1To2, FreezePreset::kL1To3, FreezePreset::kL1To4Prime,
          FreezePreset::kL1To4};
}

FreezePolicy::FreezePolicy() { trainable_.fill(true); }

FreezePolicy FreezePolicy::with_trainable(std::initializer_list<ModelGroup> groups) {
  FreezePolicy p;
  p.trainable_.fill(false);
  for (auto g : groups) p.trainable_[static_cast<std::size_t>(g)] = true;
  p.trainable_[static_cast<std::size_t>(ModelGroup::kDecoder)] = true;
  return p;
}

std::vector<ModelGroup> FreezePolicy::trainable_groups() const {
  std::vector<ModelGroup> out;
  for (auto g : kAllGroups)
    if (trainable(g)) out.push_back(g);
  return out;
}

std::vector<ModelGroup> FreezePolicy::frozen_groups() const {
  std::vector<ModelGroup> out;
  for (auto g : kAllGroups)
    if (!trainable(g)) out.push_back(g);
  return out;
}

std::string FreezePolicy::describe() const {
  std::string s;
  for (auto g : trainable_groups()) s += (s.empty() ? "" : ",") + to_string(g);
  return s;
}

std::vector<FreezePhase> phases_for(FreezePreset preset, double probe_fraction) {
  using G = ModelGroup;
  const FreezePolicy dp = FreezePolicy::with_trainable({});
  const FreezePolicy famix = FreezePolicy::with_trainable({G::kLayer4Tail});
  switch (preset) {
    case FreezePreset::kFamix:
    case FreezePreset::kL1To4Prime:
      return {{to_string(preset), famix, 1.0}};
    case FreezePreset::kFT:
      return {{"FT", FreezePolicy(), 1.0}};
    case FreezePreset::kDP:
    case FreezePreset::kL1To4:
      return {{to_string(preset), dp, 1.0}};
    case FreezePreset::kDPFT:
      if (!(probe_fraction > 0.0 && probe_fraction < 1.0)) {
        throw ConfigError(fmt::format("DP_FT probe fraction {} must be in (0, 1)", probe_fraction));
      }
      return {{"DP", dp, probe_fraction}, {"FT", FreezePolicy(), 1.0 - probe_fraction}};
    case FreezePreset::kL1:
      return {{"L1", FreezePolicy::with_trainable({G::kLayer2, G::kLayer3, G::kLayer4, G::kLayer4Tail}), 1.0}};
    case FreezePreset::kL1To2:
      return {{"L1-2", FreezePolicy::with_trainable({G::kLayer3, G::kLayer4, G::kLayer4Tail}), 1.0}};
    case FreezePreset::kL1To3:
      return {{"L1-3", FreezePolicy::with_trainable({G::kLayer4, G::kLayer4Tail}), 1.0}};
  }
  throw ConfigError("unknown freeze preset");
}

std::vector<std::int64_t> phase_lengths(const std::vector<FreezePhase>& phases, std::int64_t iterations) {
  std::vector<std::int64_t> out;
  std::int64_t used = 0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::int64_t n = i + 1 == phases.size()
                               ? iterations - used
                               : static_cast<std::int64_t>(std::llround(phases[i].fraction * iterations));
    out.push_back(n);
    used += n;
  }
  return out;
}

void apply_freeze(SegModel& model, const FreezePolicy& policy) {
  for (auto g : kAllGroups) {
    for (auto& p : model->group_parameters(g)) p.set_requires_grad(policy.trainable(g));
  }
}

void set_train_mode(SegModel& model, const FreezePolicy& policy) {
  model->train();
  for (auto g : policy.frozen_groups()) model->group(g).eval();
}

std::uint64_t frozen_checksum(SegModel& model, const FreezePolicy& policy) {
  std::vector<torch::Tensor> all;
  for (auto g : policy.frozen_groups()) {
    for (auto& t : model->group_state(g)) all.push_back(t);
  }
  return tensor_checksum(all);
}

}  // namespace famix
