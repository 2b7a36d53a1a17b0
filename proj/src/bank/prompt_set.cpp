#include "famix/bank/prompt_set.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fstream>
#include <set>

#include "famix/error.hpp"

namespace famix {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(PromptVariant v) {
  switch (v) {
    case PromptVariant::kRsp: return "RSP";
    case PromptVariant::kRcp: return "RCP";
    case PromptVariant::kNone: return "none";
  }
  return "none";
}

PromptVariant parse_prompt_variant(const std::string& s) {
  if (s == "RSP") return PromptVariant::kRsp;
  if (s == "RCP") return PromptVariant::kRcp;
  if (s == "none") return PromptVariant::kNone;
  throw ConfigError(fmt::format("unknown prompt variant '{}' (expected RSP, RCP or none)", s));
}

void PromptSet::validate() const {
  if (entries.empty()) throw ConfigError(fmt::format("prompt set '{}' is empty", id));
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (trim(e).empty()) throw ConfigError(fmt::format("prompt set '{}' has a blank entry", id));
    if (!seen.insert(e).second) {
      throw ConfigError(fmt::format("prompt set '{}' repeats '{}'", id, e));
    }
  }
}

PromptSet PromptSet::take(std::size_t n) const {
  if (n == 0 || n > entries.size()) {
    throw ConfigError(
        fmt::format("cannot take {} prompts from '{}' of size {}", n, id, entries.size()));
  }
  PromptSet out = *this;
  out.entries.resize(n);
  out.id = fmt::format("{}[:{}]", id, n);
  return out;
}

PromptSet load_prompt_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open prompt set {}", path.string()));
  PromptSet set;
  set.id = path.stem().string();
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      constexpr std::string_view kPrefix = "# variant:";
      if (!t.starts_with(kPrefix)) {
        throw ConfigError(fmt::format("{}: first line must be '# variant: RSP|RCP|none'",
                                      path.string()));
      }
      set.variant = parse_prompt_variant(trim(t.substr(kPrefix.size())));
      header = true;
      continue;
    }
    if (t.starts_with('#')) continue;
    set.entries.push_back(t);
  }
  if (!header) throw ConfigError(fmt::format("{}: missing variant header", path.string()));
  set.validate();
  return set;
}

void save_prompt_set(const PromptSet& set, const std::filesystem::path& path) {
  set.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write prompt set {}", path.string()));
  out << "# variant: " << to_string(set.variant) << '\n';
  for (const auto& e : set.entries) out << e << '\n';
}

std::vector<std::string> load_class_names(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open class-names file {}", path.string()));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.starts_with('#')) continue;
    names.push_back(t);
  }
  if (names.empty()) throw ConfigError(fmt::format("{} lists no classes", path.string()));
  return names;
}

}  // namespace famix
