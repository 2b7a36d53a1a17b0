#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "famix/eval/synthetic.hpp"
#include "famix/mining/pin.hpp"
#include "famix/training/trainer.hpp"

namespace famix {

enum class Profile { kDesk, kPaper };
Profile parse_profile(const std::string& s);
std::string to_string(Profile p);

enum class MiningKind { kLocal, kGlobal, kNoise };

enum class Command { kSynth, kMine, kTrain, kEval, kAblate, kReport };
std::string to_string(Command c);

/// Command-independent run descriptor, filled from profile defaults, a key=value file and
/// command-line overrides (in that order).
struct ExperimentConfig {
  Profile profile = Profile::kDesk;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out = "famix_out";

  // Data: "synthetic" builds the procedural corpus in memory; otherwise a manifest path.
  std::string dataset = "synthetic";
  std::string train_split = "train";
  std::vector<std::string> eval_splits = {"val_source", "val_shifted"};
  std::filesystem::path classes;
  SyntheticCorpusOptions synthetic;

  std::string encoder = "tiny-clip";
  std::uint64_t encoder_seed = 0;

  std::filesystem::path prompts;
  std::size_t prompt_count = 0;  // 0 = whole set
  PromptConstruction construction = PromptConstruction::kStyleAndClass;
  MiningKind mining = MiningKind::kLocal;
  PinOptions pin;
  int mining_batch = 8;
  int mining_workers = 1;

  std::filesystem::path bank;
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path checkpoint;
  std::int64_t checkpoint_every = 0;
  /// Stop (and checkpoint) after this many iterations; 0 = run the whole budget.
  std::int64_t stop_at = 0;
  bool resume = false;

  std::vector<std::filesystem::path> checkpoints;
  int eval_batch = 8;

  std::string ablation = "table5";
  std::vector<std::string> arms;
  std::vector<std::size_t> prompt_counts = {1, 5, 10, 20};
  std::vector<double> snr_values = {0.0, 10.0, 20.0, 30.0};

  std::vector<std::filesystem::path> inputs;

  /// Seeds of a multi-run command: `seeds` if given, else {seed}.
  std::vector<std::uint64_t> run_seeds() const;
};

/// Profile defaults. `data_dir` holds the shipped prompt and class files.
ExperimentConfig default_config(Profile profile, const std::filesystem::path& data_dir);

struct ConfigKey {
  std::string name;
  std::string help;
};
/// Every accepted key with a one-line description, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Applies one key=value assignment; throws ConfigError naming the key on unknown keys or
/// malformed values.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
/// "key = value" lines; '#' starts a comment; blank lines skipped.
void apply_config_text(ExperimentConfig& config, const std::string& text, const std::string& origin = "config");
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Cross-field and file checks for a command, run before any model or dataset is loaded.
void validate_config(const ExperimentConfig& config, Command command);

/// Canonical key=value dump (sorted, stable) used in run records.
std::string dump_config(const ExperimentConfig& config);

}  // namespace famix
