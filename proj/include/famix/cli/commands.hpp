#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "famix/bank/style_bank.hpp"
#include "famix/cli/config.hpp"
#include "famix/eval/metrics.hpp"

namespace famix {

/// Progress lines for the terminal; never part of an artifact.
using Progress = std::function<void(const std::string&)>;

/// Training split, evaluation splits and class names of a config.
struct RunData {
  std::vector<std::string> class_names;
  std::vector<Sample> train;
  std::map<std::string, std::vector<Sample>> eval;
};
RunData load_run_data(const ExperimentConfig& config, bool with_eval);

/// Model architecture for the config's encoder and class count.
ModelConfig resolve_model_config(const ExperimentConfig& config, int num_classes);
nlohmann::json model_config_to_json(const ModelConfig& model, const std::vector<std::string>& class_names);
ModelConfig model_config_from_json(const nlohmann::json& j, std::vector<std::string>* class_names = nullptr);

/// Writes a synthetic two-domain corpus under <out>/synthetic; returns the manifest path.
std::filesystem::path cmd_synth(const ExperimentConfig& config, const Progress& progress = {});

struct MineResult {
  std::filesystem::path bank_path;
  StyleBank bank;
  nlohmann::json log;
};
/// Mines a bank (local, global or noise) over one pass of the training split. Writes the bank
/// and <out>/mining_log.json with per-batch growth, per-class counts and PIN loss traces.
MineResult cmd_mine(const ExperimentConfig& config, const Progress& progress = {});

struct TrainResult {
  std::filesystem::path checkpoint;
  std::int64_t iterations = 0;
  double final_loss = 0.0;
};
/// Trains one run; writes <out>/train_log.jsonl and a checkpoint directory (model.pt,
/// optim.pt, meta.json, model.json). Resumes from the checkpoint when config.resume is set.
TrainResult cmd_train(const ExperimentConfig& config, const Progress& progress = {});

struct EvalResult {
  /// Split -> one report per checkpoint, in checkpoint order.
  std::map<std::string, std::vector<EvalReport>> reports;
  std::map<std::string, RunSummary> summaries;
};
/// Evaluates each checkpoint on every eval split. Writes <out>/eval.{json,tsv,txt}.
EvalResult cmd_eval(const ExperimentConfig& config, const Progress& progress = {});

struct AblationArm {
  std::string name;
  /// Factor name -> value, shown as table columns.
  std::vector<std::pair<std::string, std::string>> factors;
  std::function<void(ExperimentConfig&)> apply;
};
/// Arms of an ablation kind: table5, freeze, prompts, sets, noise, locality or protocols.
std::vector<AblationArm> ablation_arms(const ExperimentConfig& config);

struct ArmResult {
  std::string arm;
  std::uint64_t seed = 0;
  /// Split -> mIoU; empty when the arm failed.
  std::map<std::string, double> miou;
  double final_loss = 0.0;
  std::optional<std::string> error;
};
struct AblationResult {
  std::vector<ArmResult> runs;
  std::vector<std::string> failed;
};
/// Trains and evaluates every arm for every seed in-process (shared corpus, encoder and
/// mined banks). Writes <out>/ablation_<kind>.{json,tsv,txt} and, for the freeze and
/// prompt-count sweeps, an SVG line plot. Failed arms are listed, not fatal.
AblationResult cmd_ablate(const ExperimentConfig& config, const Progress& progress = {});

/// Consolidates the eval.json of several run directories into <out>/report.{json,tsv,txt}.
nlohmann::json cmd_report(const ExperimentConfig& config, const Progress& progress = {});

}  // namespace famix
