#include <CLI11.hpp>
#include <cstdlib>
#include <fmt/format.h>
#include <iostream>
#include <json.hpp>
#include <torch/torch.h>

#include "famix/cli/commands.hpp"
#include "famix/cli/config.hpp"
#include "famix/error.hpp"

#ifndef FAMIX_DATA_DIR
#define FAMIX_DATA_DIR "data"
#endif

namespace {

int error_record(const std::string& kind, const std::string& message, const nlohmann::json& extra = {}) {
  nlohmann::json err{{"kind", kind}, {"message", message}};
  if (extra.is_object()) err.update(extra);
  std::cerr << nlohmann::json{{"error", err}}.dump() << std::endl;
  return 1;
}

void progress(const std::string& line) { std::cout << line << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style mining, style-randomized fine-tuning and evaluation for domain-generalized segmentation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string profile = "desk";
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  std::string data_dir = std::getenv("FAMIX_DATA_DIR") ? std::getenv("FAMIX_DATA_DIR") : FAMIX_DATA_DIR;
  int threads = 0;
  bool list_keys = false, print_config = false;
  app.add_option("--profile", profile, "Defaults profile")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--set", sets, "Override one config key (key=value); repeatable");
  app.add_option("--data-dir", data_dir, "Directory with the shipped prompt and class files");
  app.add_option("--threads", threads, "Intra-op threads (0 = library default)");
  app.add_flag("--list-keys", list_keys, "Print every config key and exit");
  app.add_flag("--print-config", print_config, "Print the resolved config before running");

  const std::vector<std::pair<famix::Command, std::string>> commands = {
      {famix::Command::kSynth, "Write the synthetic two-domain corpus as image files and a manifest"},
      {famix::Command::kMine, "Mine a style bank (local, global or noise) from the training split"},
      {famix::Command::kTrain, "Train one run with Layer1 style randomization; writes a checkpoint"},
      {famix::Command::kEval, "Evaluate checkpoints on the eval splits (per-class IoU, mIoU, mean ± std)"},
      {famix::Command::kAblate, "Run an ablation matrix and write tables and plots"},
      {famix::Command::kReport, "Consolidate eval.json files of several runs"},
  };
  for (const auto& [cmd, help] : commands) app.add_subcommand(famix::to_string(cmd), help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (list_keys) {
      for (const auto& k : famix::config_keys()) std::cout << fmt::format("{:<20} {}\n", k.name, k.help);
      return 0;
    }
    error_record("usage", e.what());
    return 2;
  }

  try {
    if (threads > 0) torch::set_num_threads(threads);
    auto config = famix::default_config(famix::parse_profile(profile), data_dir);
    if (!config_file.empty()) famix::apply_config_file(config, config_file);
    if (seed) config.seed = *seed;
    if (!out.empty()) config.out = out;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw famix::ConfigError(fmt::format("--set '{}': expected key=value", s));
      famix::set_config_value(config, s.substr(0, eq), s.substr(eq + 1));
    }
    if (print_config) std::cout << famix::dump_config(config);

    const auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    if (name == "synth") {
      famix::cmd_synth(config, progress);
    } else if (name == "mine") {
      famix::cmd_mine(config, progress);
    } else if (name == "train") {
      famix::cmd_train(config, progress);
    } else if (name == "eval") {
      famix::cmd_eval(config, progress);
    } else if (name == "ablate") {
      const auto r = famix::cmd_ablate(config, progress);
      if (!r.failed.empty()) {
        error_record("partial_failure", fmt::format("{} of {} arm runs failed", r.failed.size(), r.runs.size()),
                     {{"failed", r.failed}});
        return 3;
      }
    } else if (name == "report") {
      famix::cmd_report(config, progress);
    }
    return 0;
  } catch (const famix::DivergenceError& e) {
    return error_record(std::string(famix::to_string(e.kind())), e.what(), {{"iteration", e.iteration()}});
  } catch (const famix::Error& e) {
    return error_record(std::string(famix::to_string(e.kind())), e.what());
  } catch (const c10::Error& e) {
    return error_record("torch", e.what_without_backtrace());
  } catch (const std::exception& e) {
    return error_record("internal", e.what());
  }
}
