#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace famix {

/// Style fragments used to build mining prompts.
///   kRsp  meaningful random-style phrases ("Ethereal Mist", ...)
///   kRcp  random character strings ("ioscjspa", ...)
enum class PromptVariant { kRsp, kRcp, kNone };

std::string to_string(PromptVariant v);
PromptVariant parse_prompt_variant(const std::string& s);

struct PromptSet {
  std::string id;
  PromptVariant variant = PromptVariant::kNone;
  std::vector<std::string> entries;

  std::size_t cardinality() const noexcept { return entries.size(); }

  /// Non-empty, unique, non-blank entries.
  void validate() const;

  /// First n entries (the |R| sweep). Throws ConfigError when n is 0 or exceeds the set.
  PromptSet take(std::size_t n) const;
};

/// Text format: a header line "# variant: RSP" (or RCP / none), then one fragment per line.
/// Blank lines are skipped. The set id defaults to the file stem.
PromptSet load_prompt_set(const std::filesystem::path& path);
void save_prompt_set(const PromptSet& set, const std::filesystem::path& path);

/// One class name per line; line index = class id.
std::vector<std::string> load_class_names(const std::filesystem::path& path);

}  // namespace famix
