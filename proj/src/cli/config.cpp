#include "famix/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "famix/bank/prompt_set.hpp"
#include "famix/error.hpp"

namespace famix {

namespace fs = std::filesystem;

Profile parse_profile(const std::string& s) {
  if (s == "desk") return Profile::kDesk;
  if (s == "paper") return Profile::kPaper;
  throw ConfigError(fmt::format("unknown profile '{}' (expected desk or paper)", s));
}

std::string to_string(Profile p) { return p == Profile::kDesk ? "desk" : "paper"; }

std::string to_string(Command c) {
  switch (c) {
    case Command::kSynth: return "synth";
    case Command::kMine: return "mine";
    case Command::kTrain: return "train";
    case Command::kEval: return "eval";
    case Command::kAblate: return "ablate";
    case Command::kReport: return "report";
  }
  return "?";
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

ExperimentConfig default_config(Profile profile, const fs::path& data_dir) {
  ExperimentConfig c;
  c.profile = profile;
  c.prompts = data_dir / "prompts" / "r1_random_style.txt";
  if (profile == Profile::kPaper) {
    c.encoder = "tiny-clip-paper";
    c.model.trunk = TrunkConfig::paper();
    c.model.head = HeadConfig::paper();
    c.train.iterations = 40000;
    c.train.jitter.crop = 768;
    c.classes = data_dir / "classes" / "cityscapes19.txt";
    c.seeds = {0, 1, 2};
  } else {
    c.train.iterations = 300;
  }
  return c;
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError(fmt::format("{}: invalid value '{}' (expected {})", key, value, expected));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  if (value == "inf" || value == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double d = std::stod(value, &pos);
    if (pos != value.size() || std::isnan(d)) bad_value(key, value, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

bool parse_switch(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1" || value == "yes") return true;
  if (value == "off" || value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "on or off");
}

int positive(const std::string& key, const std::string& value) {
  const int v = parse_integer<int>(key, value);
  if (v <= 0) bad_value(key, value, "a positive integer");
  return v;
}

double non_negative(const std::string& key, const std::string& value) {
  const double v = parse_real(key, value);
  if (!(v >= 0.0) || std::isinf(v)) bad_value(key, value, "a finite number >= 0");
  return v;
}

template <typename Fn>
auto wrap_config_error(const std::string& key, const std::string& value, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: invalid value '{}' ({})", key, value, e.what()));
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

struct KeyEntry {
  ConfigKey doc;
  Setter set;
};

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    auto add = [&](std::string name, std::string help, Setter s) {
      t.push_back({{std::move(name), std::move(help)}, std::move(s)});
    };
    using C = ExperimentConfig;
    using S = const std::string&;
    add("seed", "base seed of the run", [](C& c, S k, S v) { c.seed = parse_integer<std::uint64_t>(k, v); });
    add("seeds", "comma-separated seeds for multi-run commands (eval summaries, ablations)", [](C& c, S k, S v) {
      c.seeds.clear();
      for (const auto& s : split_list(v)) c.seeds.push_back(parse_integer<std::uint64_t>(k, s));
      if (c.seeds.empty()) bad_value(k, v, "at least one seed");
    });
    add("out", "output directory", [](C& c, S, S v) { c.out = v; });
    add("dataset", "'synthetic' or a manifest file (image label split per line)", [](C& c, S, S v) { c.dataset = v; });
    add("train_split", "manifest split used for mining and training", [](C& c, S, S v) { c.train_split = v; });
    add("eval_splits", "comma-separated manifest splits to evaluate", [](C& c, S k, S v) {
      c.eval_splits = split_list(v);
      if (c.eval_splits.empty()) bad_value(k, v, "at least one split");
    });
    add("classes", "class-names file (one name per line, line index = id)", [](C& c, S, S v) { c.classes = v; });
    add("synthetic_train", "synthetic corpus: training images", [](C& c, S k, S v) { c.synthetic.train_images = positive(k, v); });
    add("synthetic_val", "synthetic corpus: images per validation split", [](C& c, S k, S v) { c.synthetic.val_images = positive(k, v); });
    add("synthetic_size", "synthetic corpus: image side in pixels", [](C& c, S k, S v) { c.synthetic.image_size = positive(k, v); });
    add("synthetic_seed", "synthetic corpus: generator seed",
        [](C& c, S k, S v) { c.synthetic.seed = parse_integer<std::uint64_t>(k, v); });
    add("encoder", "joint encoder id: tiny-clip, tiny-clip-paper or stub", [](C& c, S k, S v) {
      if (v != "tiny-clip" && v != "tiny-clip-paper" && v != "stub") bad_value(k, v, "tiny-clip, tiny-clip-paper or stub");
      c.encoder = v;
    });
    add("encoder_seed", "seed of the encoder weights (also the backbone initialization)", [](C& c, S k, S v) {
      c.encoder_seed = parse_integer<std::uint64_t>(k, v);
      c.model.encoder_seed = c.encoder_seed;
    });
    add("prompts", "prompt-set file of style fragments", [](C& c, S, S v) { c.prompts = v; });
    add("prompt_count", "use the first N fragments (|R|); 0 = all",
        [](C& c, S k, S v) { c.prompt_count = parse_integer<std::size_t>(k, v); });
    add("prompt_construction", "style+class, style or class", [](C& c, S k, S v) {
      c.construction = wrap_config_error(k, v, [&] { return parse_prompt_construction(v); });
    });
    add("mining", "local (class-wise PIN), global (per-map PIN) or noise (SNR-perturbed source styles)",
        [](C& c, S k, S v) {
          if (v == "local") c.mining = MiningKind::kLocal;
          else if (v == "global") c.mining = MiningKind::kGlobal;
          else if (v == "noise") c.mining = MiningKind::kNoise;
          else bad_value(k, v, "local, global or noise");
        });
    add("pin_steps", "PIN gradient steps per patch", [](C& c, S k, S v) {
      c.pin.steps = parse_integer<int>(k, v);
      if (c.pin.steps < 0) bad_value(k, v, "an integer >= 0");
    });
    add("pin_step_size", "PIN step size", [](C& c, S k, S v) {
      c.pin.step_size = parse_real(k, v);
      if (!(c.pin.step_size > 0.0) || std::isinf(c.pin.step_size)) bad_value(k, v, "a finite number > 0");
    });
    add("mining_batch", "images per mining batch", [](C& c, S k, S v) { c.mining_batch = positive(k, v); });
    add("mining_workers", "threads running PIN within a batch", [](C& c, S k, S v) { c.mining_workers = positive(k, v); });
    add("m", "patches per feature map (perfect square)", [](C& c, S k, S v) {
      const int m = positive(k, v);
      const int s = static_cast<int>(std::lround(std::sqrt(m)));
      if (s * s != m) bad_value(k, v, "a perfect square");
      c.train.m = m;
    });
    add("snr_db", "noise SNR in dB for mining=noise / augment=noise ('inf' allowed)", [](C& c, S k, S v) {
      c.train.mode.snr_db = parse_real(k, v);
    });
    add("bank", "style-bank file (written by mine, read by train)", [](C& c, S, S v) { c.bank = v; });
    add("augment", "language, noise, none or mixstyle", [](C& c, S k, S v) {
      c.train.mode.variant = wrap_config_error(k, v, [&] { return parse_augment_variant(v); });
    });
    add("mix", "on: mix sampled and own style; off: restylize directly", [](C& c, S k, S v) {
      c.train.mode.mix = parse_switch(k, v);
    });
    add("mix_source", "T (mined), S (source styles) or S+T", [](C& c, S k, S v) {
      c.train.mode.mix_source = wrap_config_error(k, v, [&] { return parse_mix_source(v); });
    });
    add("locality", "local (per patch) or global (per map)", [](C& c, S k, S v) {
      c.train.mode.locality = wrap_config_error(k, v, [&] { return parse_locality(v); });
    });
    add("mix_probability", "chance a batch is randomized", [](C& c, S k, S v) {
      c.train.mode.probability = parse_real(k, v);
      if (!(c.train.mode.probability >= 0.0 && c.train.mode.probability <= 1.0)) bad_value(k, v, "a number in [0, 1]");
    });
    add("alpha_shape", "scalar or per_channel mixing weight", [](C& c, S k, S v) {
      if (v == "scalar") c.train.mode.alpha_shape = MixWeight::Shape::kScalar;
      else if (v == "per_channel") c.train.mode.alpha_shape = MixWeight::Shape::kPerChannel;
      else bad_value(k, v, "scalar or per_channel");
    });
    add("empty_class", "skip (keep own style) or error when a class bank is empty", [](C& c, S k, S v) {
      if (v == "skip") c.train.mode.empty_class = EmptyClassFallback::kSkipMixing;
      else if (v == "error") c.train.mode.empty_class = EmptyClassFallback::kError;
      else bad_value(k, v, "skip or error");
    });
    add("freeze", "FAMIX, FT, DP, DP_FT, L1, L1-2, L1-3, L1-4' or L1-4", [](C& c, S k, S v) {
      c.train.freeze = wrap_config_error(k, v, [&] { return parse_freeze_preset(v); });
    });
    add("probe_fraction", "share of DP_FT iterations spent decoder probing", [](C& c, S k, S v) {
      c.train.probe_fraction = parse_real(k, v);
      if (!(c.train.probe_fraction > 0.0 && c.train.probe_fraction < 1.0)) bad_value(k, v, "a number in (0, 1)");
    });
    add("iterations", "training iterations", [](C& c, S k, S v) { c.train.iterations = positive(k, v); });
    add("batch_size", "training batch size", [](C& c, S k, S v) { c.train.batch_size = positive(k, v); });
    add("lr_decoder", "initial learning rate of the decoder", [](C& c, S k, S v) { c.train.lr_decoder = non_negative(k, v); });
    add("lr_backbone", "initial learning rate of trainable backbone groups",
        [](C& c, S k, S v) { c.train.lr_backbone = non_negative(k, v); });
    add("momentum", "SGD momentum", [](C& c, S k, S v) {
      c.train.momentum = parse_real(k, v);
      if (!(c.train.momentum >= 0.0 && c.train.momentum < 1.0)) bad_value(k, v, "a number in [0, 1)");
    });
    add("weight_decay", "SGD weight decay (trainable parameters only)",
        [](C& c, S k, S v) { c.train.weight_decay = non_negative(k, v); });
    add("power", "poly schedule power", [](C& c, S k, S v) {
      c.train.power = parse_real(k, v);
      if (!(c.train.power > 0.0) || std::isinf(c.train.power)) bad_value(k, v, "a finite number > 0");
    });
    add("crop", "square training crop side; 0 = full image", [](C& c, S k, S v) {
      c.train.jitter.crop = parse_integer<int>(k, v);
      if (c.train.jitter.crop < 0) bad_value(k, v, "an integer >= 0");
    });
    add("jitter", "colour jitter, crop and flip on/off", [](C& c, S k, S v) { c.train.jitter_enabled = parse_switch(k, v); });
    add("jitter_strength", "brightness, contrast and saturation jitter strength", [](C& c, S k, S v) {
      const double s = parse_real(k, v);
      if (!(s >= 0.0 && s < 1.0)) bad_value(k, v, "a number in [0, 1)");
      c.train.jitter.brightness = c.train.jitter.contrast = c.train.jitter.saturation = s;
    });
    add("hflip", "random horizontal flip on/off", [](C& c, S k, S v) { c.train.jitter.hflip = parse_switch(k, v); });
    add("checkpoint", "checkpoint directory (train writes, eval reads)", [](C& c, S, S v) { c.checkpoint = v; });
    add("checkpoint_every", "also checkpoint every N iterations; 0 = only at the end", [](C& c, S k, S v) {
      c.checkpoint_every = parse_integer<std::int64_t>(k, v);
      if (c.checkpoint_every < 0) bad_value(k, v, "an integer >= 0");
    });
    add("stop_at", "stop and checkpoint after N iterations (continue later with resume=on); 0 = whole budget",
        [](C& c, S k, S v) {
          c.stop_at = parse_integer<std::int64_t>(k, v);
          if (c.stop_at < 0) bad_value(k, v, "an integer >= 0");
        });
    add("resume", "continue from the checkpoint directory if it exists", [](C& c, S k, S v) { c.resume = parse_switch(k, v); });
    add("checkpoints", "comma-separated checkpoint directories for eval (one run each)", [](C& c, S k, S v) {
      c.checkpoints.clear();
      for (const auto& s : split_list(v)) c.checkpoints.emplace_back(s);
      if (c.checkpoints.empty()) bad_value(k, v, "at least one directory");
    });
    add("eval_batch", "images per evaluation batch", [](C& c, S k, S v) { c.eval_batch = positive(k, v); });
    add("ablation", "table5, freeze, prompts, sets, noise, locality or protocols", [](C& c, S k, S v) {
      static const std::vector<std::string> allowed = {"table5", "freeze", "prompts", "sets", "noise", "locality", "protocols"};
      if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
        bad_value(k, v, "table5, freeze, prompts, sets, noise, locality or protocols");
      }
      c.ablation = v;
    });
    add("arms", "comma-separated arm names to keep (empty = every arm of the ablation)",
        [](C& c, S, S v) { c.arms = split_list(v); });
    add("prompt_counts", "|R| values of the prompt-count sweep", [](C& c, S k, S v) {
      c.prompt_counts.clear();
      for (const auto& s : split_list(v)) {
        const auto n = parse_integer<std::size_t>(k, s);
        if (n == 0) bad_value(k, v, "positive counts");
        c.prompt_counts.push_back(n);
      }
      if (c.prompt_counts.empty()) bad_value(k, v, "at least one count");
    });
    add("snr_values", "SNR values (dB) of the noise sweep", [](C& c, S k, S v) {
      c.snr_values.clear();
      for (const auto& s : split_list(v)) c.snr_values.push_back(parse_real(k, s));
      if (c.snr_values.empty()) bad_value(k, v, "at least one value");
    });
    add("inputs", "comma-separated run directories consolidated by report", [](C& c, S k, S v) {
      c.inputs.clear();
      for (const auto& s : split_list(v)) c.inputs.emplace_back(s);
      if (c.inputs.empty()) bad_value(k, v, "at least one directory");
    });
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : key_table()) k.push_back(e.doc);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : key_table()) {
    if (e.doc.name == key) {
      e.set(config, key, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void apply_config_text(ExperimentConfig& config, const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key = value, got '{}'", origin, lineno, line));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, lineno, e.what()));
    }
  }
}

void apply_config_file(ExperimentConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

namespace {

void require_file(const fs::path& p, const std::string& key) {
  if (p.empty()) throw ConfigError(fmt::format("{}: required", key));
  if (!fs::is_regular_file(p)) throw ConfigError(fmt::format("{}: file '{}' does not exist", key, p.string()));
}

bool uses_manifest(const ExperimentConfig& c) { return c.dataset != "synthetic"; }

}  // namespace

void validate_config(const ExperimentConfig& c, Command command) {
  if (command == Command::kReport) {
    if (c.inputs.empty()) throw ConfigError("inputs: report needs at least one run directory");
    for (const auto& d : c.inputs) {
      if (!fs::is_regular_file(d / "eval.json")) {
        throw ConfigError(fmt::format("inputs: '{}' has no eval.json", d.string()));
      }
    }
    return;
  }
  if (command == Command::kSynth) return;
  if (uses_manifest(c)) {
    require_file(c.dataset, "dataset");
    require_file(c.classes, "classes");
  } else if (!c.classes.empty()) {
    require_file(c.classes, "classes");
  }
  if (c.encoder == "stub" && command != Command::kMine) {
    throw ConfigError("encoder: the stub encoder has no segmentation backbone; use tiny-clip");
  }
  const auto& mode = c.train.mode;
  if (command == Command::kMine) {
    if (c.mining != MiningKind::kNoise) require_file(c.prompts, "prompts");
    if (c.mining == MiningKind::kNoise && std::isnan(mode.snr_db)) throw ConfigError("snr_db: required for mining=noise");
    if (c.bank.empty()) return;  // defaults to <out>/bank.fsb
    return;
  }
  if (command == Command::kTrain || command == Command::kAblate) {
    try {
      c.train.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("training config: {}", e.what()));
    }
  }
  if (command == Command::kTrain) {
    if (mode.needs_mined_bank()) {
      if (c.bank.empty()) {
        throw ConfigError(fmt::format("bank: mode '{}' samples mined styles but no bank path is set", mode.describe()));
      }
      require_file(c.bank, "bank");
    }
    for (auto len : phase_lengths(phases_for(c.train.freeze, c.train.probe_fraction), c.train.iterations)) {
      if (len <= 0) {
        throw ConfigError(fmt::format("iterations: {} is too short for the phases of freeze={}", c.train.iterations,
                                      to_string(c.train.freeze)));
      }
    }
    return;
  }
  if (command == Command::kEval) {
    if (c.checkpoints.empty() && c.checkpoint.empty()) {
      throw ConfigError("checkpoint: eval needs checkpoint or checkpoints");
    }
    auto paths = c.checkpoints.empty() ? std::vector<fs::path>{c.checkpoint} : c.checkpoints;
    for (const auto& p : paths) {
      if (!fs::is_regular_file(p / "model.pt") || !fs::is_regular_file(p / "meta.json")) {
        throw ConfigError(fmt::format("checkpoint: '{}' is not a checkpoint directory", p.string()));
      }
    }
    return;
  }
  if (command == Command::kAblate) {
    require_file(c.prompts, "prompts");
    if (c.ablation == "prompts") {
      for (auto n : c.prompt_counts) {
        if (n == 0) throw ConfigError("prompt_counts: counts must be positive");
      }
    }
  }
}

std::string dump_config(const ExperimentConfig& c) {
  auto join = [](const auto& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + fmt::format("{}", x);
    return s;
  };
  auto paths = [](const std::vector<fs::path>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x.string();
    return s;
  };
  std::map<std::string, std::string> kv{
      {"profile", to_string(c.profile)},
      {"seed", fmt::format("{}", c.seed)},
      {"seeds", join(c.run_seeds())},
      {"dataset", c.dataset},
      {"train_split", c.train_split},
      {"eval_splits", join(c.eval_splits)},
      {"classes", c.classes.string()},
      {"synthetic", fmt::format("{}x{} train={} val={} seed={}", c.synthetic.image_size, c.synthetic.image_size,
                                c.synthetic.train_images, c.synthetic.val_images, c.synthetic.seed)},
      {"encoder", c.encoder},
      {"encoder_seed", fmt::format("{}", c.encoder_seed)},
      {"prompts", c.prompts.filename().string()},
      {"prompt_count", fmt::format("{}", c.prompt_count)},
      {"prompt_construction", to_string(c.construction)},
      {"mining", c.mining == MiningKind::kLocal ? "local" : c.mining == MiningKind::kGlobal ? "global" : "noise"},
      {"pin_steps", fmt::format("{}", c.pin.steps)},
      {"pin_step_size", fmt::format("{}", c.pin.step_size)},
      {"bank", c.bank.string()},
      {"checkpoints", paths(c.checkpoints)},
      {"ablation", c.ablation},
      {"arms", join(c.arms)},
  };
  const auto tj = c.train.to_json();
  for (const auto& [k, v] : tj.items()) kv["train." + k] = v.dump();
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace famix
