#include "famix/bank/style_bank.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "famix/error.hpp"

namespace famix {

StyleStats quantize_style(const StyleStats& s) {
  StyleStats q = s;
  for (double& v : q.mu) v = static_cast<double>(static_cast<float>(v));
  for (double& v : q.sigma) {
    float f = static_cast<float>(v);
    while (static_cast<double>(f) < kEpsilonSigma) {
      f = std::nextafter(f, std::numeric_limits<float>::infinity());
    }
    v = static_cast<double>(f);
  }
  return q;
}

StyleBank::StyleBank(int channels, std::vector<std::string> class_names, MiningMetadata metadata)
    : channels_(channels),
      class_names_(std::move(class_names)),
      metadata_(std::move(metadata)),
      per_class_(class_names_.size()) {
  if (channels < 1) throw ShapeError(fmt::format("style bank needs channels >= 1, got {}", channels));
  if (class_names_.empty()) throw ShapeError("style bank needs at least one class");
  if (metadata_.kind == BankKind::kGlobal && class_names_.size() != 1) {
    throw ShapeError("a global style bank has exactly one key");
  }
}

StyleBank StyleBank::global(int channels, std::string key_name, MiningMetadata metadata) {
  metadata.kind = BankKind::kGlobal;
  return StyleBank(channels, {std::move(key_name)}, std::move(metadata));
}

void StyleBank::add(int class_id, StyleEntry entry) {
  if (class_id < 0 || class_id >= num_classes()) {
    throw InvalidInputError(
        fmt::format("class {} outside bank range [0, {})", class_id, num_classes()));
  }
  if (entry.style.channels() != channels_) {
    throw ShapeError(fmt::format("style with {} channels added to a {}-channel bank",
                                 entry.style.channels(), channels_));
  }
  entry.style.validate();
  entry.style = quantize_style(entry.style);
  per_class_[static_cast<std::size_t>(class_id)].push_back(std::move(entry));
}

const std::vector<StyleEntry>& StyleBank::entries(int class_id) const {
  if (class_id < 0 || class_id >= num_classes()) {
    throw InvalidInputError(
        fmt::format("class {} outside bank range [0, {})", class_id, num_classes()));
  }
  return per_class_[static_cast<std::size_t>(class_id)];
}

std::size_t StyleBank::total_entries() const noexcept {
  std::size_t n = 0;
  for (const auto& v : per_class_) n += v.size();
  return n;
}

void StyleBank::validate() const {
  if (channels_ < 1) throw InvalidInputError("bank: channels must be >= 1");
  if (class_names_.empty()) throw InvalidInputError("bank: no classes");
  if (metadata_.kind == BankKind::kGlobal && class_names_.size() != 1) {
    throw InvalidInputError("bank: global bank must have exactly one key");
  }
  for (std::size_t k = 0; k < per_class_.size(); ++k) {
    for (std::size_t e = 0; e < per_class_[k].size(); ++e) {
      const auto& s = per_class_[k][e].style;
      if (s.channels() != channels_ || s.sigma.size() != s.mu.size()) {
        throw InvalidInputError(fmt::format("bank: class {} entry {} has {} channels, expected {}",
                                            k, e, s.channels(), channels_));
      }
      for (int c = 0; c < channels_; ++c) {
        if (!std::isfinite(s.mu[c]) || !std::isfinite(s.sigma[c])) {
          throw InvalidInputError(
              fmt::format("bank: class {} entry {} channel {} is not finite", k, e, c));
        }
        if (s.sigma[c] < kEpsilonSigma) {
          throw InvalidInputError(fmt::format(
              "bank: class {} entry {} sigma[{}] = {} below epsilon", k, e, c, s.sigma[c]));
        }
      }
    }
  }
}

}  // namespace famix
