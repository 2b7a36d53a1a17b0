#include "famix/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include "famix/bank/bank_file.hpp"
#include "famix/bank/prompt_set.hpp"
#include "famix/cli/report.hpp"
#include "famix/error.hpp"
#include "famix/eval/synthetic.hpp"
#include "famix/mining/features.hpp"
#include "famix/mining/miner.hpp"
#include "famix/nn/inference.hpp"
#include "famix/training/trainer.hpp"

namespace famix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const Progress& progress, const std::string& line) {
  if (progress) progress(line);
}

std::string mining_name(MiningKind k) {
  switch (k) {
    case MiningKind::kLocal: return "local";
    case MiningKind::kGlobal: return "global";
    case MiningKind::kNoise: return "noise";
  }
  return "?";
}

std::vector<std::string> resolve_class_names(const ExperimentConfig& c) {
  if (c.dataset == "synthetic") {
    const auto& names = synthetic_class_names();
    if (!c.classes.empty() && load_class_names(c.classes) != names) {
      throw ConfigError(fmt::format("classes: '{}' does not match the synthetic corpus classes", c.classes.string()));
    }
    return names;
  }
  return load_class_names(c.classes);
}

PromptSet resolve_prompts(const ExperimentConfig& c) {
  auto set = load_prompt_set(c.prompts);
  return c.prompt_count > 0 ? set.take(c.prompt_count) : set;
}

fs::path bank_output_path(const ExperimentConfig& c) { return c.bank.empty() ? c.out / "bank.fsb" : c.bank; }
fs::path checkpoint_path(const ExperimentConfig& c) { return c.checkpoint.empty() ? c.out / "checkpoint" : c.checkpoint; }

TrainConfig resolve_train_config(const ExperimentConfig& c) {
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  return tc;
}

}  // namespace

RunData load_run_data(const ExperimentConfig& c, bool with_eval) {
  RunData d;
  d.class_names = resolve_class_names(c);
  const int k = static_cast<int>(d.class_names.size());
  std::vector<std::string> wanted = {c.train_split};
  if (with_eval) wanted.insert(wanted.end(), c.eval_splits.begin(), c.eval_splits.end());
  std::map<std::string, std::vector<Sample>> splits;
  if (c.dataset == "synthetic") {
    auto corpus = make_synthetic_corpus(c.synthetic);
    splits["train"] = std::move(corpus.train);
    splits["val_source"] = std::move(corpus.val_source);
    splits["val_shifted"] = std::move(corpus.val_shifted);
    for (const auto& s : wanted) {
      if (!splits.count(s)) {
        throw ConfigError(fmt::format("split '{}' is not part of the synthetic corpus (train, val_source, val_shifted)", s));
      }
    }
  } else {
    for (const auto& s : wanted) {
      if (splits.count(s)) continue;
      auto samples = load_split(c.dataset, s, k, c.train.ignore_index);
      if (samples.empty()) throw ConfigError(fmt::format("split '{}' has no entries in {}", s, c.dataset));
      splits[s] = std::move(samples);
    }
  }
  d.train = splits.at(c.train_split);
  if (with_eval) {
    for (const auto& s : c.eval_splits) d.eval[s] = splits.at(s);
  }
  return d;
}

ModelConfig resolve_model_config(const ExperimentConfig& c, int num_classes) {
  ModelConfig mc = c.model;
  mc.num_classes = num_classes;
  mc.encoder_seed = c.encoder_seed;
  if (c.encoder == "tiny-clip") {
    mc.trunk = TrunkConfig::desk();
  } else if (c.encoder == "tiny-clip-paper") {
    mc.trunk = TrunkConfig::paper();
  } else {
    throw ConfigError(fmt::format("encoder: '{}' has no segmentation backbone", c.encoder));
  }
  return mc;
}

json model_config_to_json(const ModelConfig& m, const std::vector<std::string>& class_names) {
  return {{"trunk",
           {{"stem_width", m.trunk.stem_width},
            {"widths", m.trunk.widths},
            {"blocks", m.trunk.blocks},
            {"tail_blocks", m.trunk.tail_blocks},
            {"output_stride", m.trunk.output_stride}}},
          {"head",
           {{"aspp_channels", m.head.aspp_channels},
            {"atrous_rates", m.head.atrous_rates},
            {"low_level_channels", m.head.low_level_channels},
            {"fuse_channels", m.head.fuse_channels}}},
          {"num_classes", m.num_classes},
          {"encoder_seed", m.encoder_seed},
          {"classes", class_names}};
}

ModelConfig model_config_from_json(const json& j, std::vector<std::string>* class_names) {
  try {
    ModelConfig m;
    const auto& t = j.at("trunk");
    m.trunk.stem_width = t.at("stem_width").get<int>();
    m.trunk.widths = t.at("widths").get<std::array<int, 4>>();
    m.trunk.blocks = t.at("blocks").get<std::array<int, 4>>();
    m.trunk.tail_blocks = t.at("tail_blocks").get<int>();
    m.trunk.output_stride = t.at("output_stride").get<int>();
    const auto& h = j.at("head");
    m.head.aspp_channels = h.at("aspp_channels").get<int>();
    m.head.atrous_rates = h.at("atrous_rates").get<std::vector<int>>();
    m.head.low_level_channels = h.at("low_level_channels").get<int>();
    m.head.fuse_channels = h.at("fuse_channels").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    m.encoder_seed = j.at("encoder_seed").get<std::uint64_t>();
    if (class_names) *class_names = j.at("classes").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("model.json: {}", e.what()));
  }
}

fs::path cmd_synth(const ExperimentConfig& c, const Progress& progress) {
  validate_config(c, Command::kSynth);
  const auto manifest = write_synthetic_corpus(c.synthetic, c.out / "synthetic");
  say(progress, fmt::format("wrote synthetic corpus: {}", manifest.string()));
  return manifest;
}

MineResult cmd_mine(const ExperimentConfig& c, const Progress& progress) {
  validate_config(c, Command::kMine);
  const auto data = load_run_data(c, false);
  auto encoder = make_encoder(c.encoder, c.encoder_seed);
  const auto batches = extract_feature_batches(*encoder, data.train, c.mining_batch);
  say(progress, fmt::format("mining {} over {} batches ({} images)", mining_name(c.mining), batches.size(),
                            data.train.size()));

  MineResult r;
  json log{{"kind", mining_name(c.mining)}, {"encoder", encoder->id()}, {"seed", c.seed}, {"m", c.train.m}};
  json per_batch = json::array();
  if (c.mining == MiningKind::kNoise) {
    r.bank = mine_noise_bank(batches, data.class_names, c.train.m, c.train.mode.snr_db, c.seed);
    std::vector<std::size_t> added(batches.size(), 0);
    for (int k = 0; k < r.bank.num_classes(); ++k) {
      for (const auto& e : r.bank.entries(k)) ++added.at(e.source_patch_id >> 32);
    }
    for (std::size_t b = 0; b < batches.size(); ++b) {
      per_batch.push_back({{"batch", b}, {"images", batches[b].features.size()}, {"added", added[b]}});
    }
    log["snr_db"] = c.train.mode.snr_db;
  } else {
    const auto prompts = resolve_prompts(c);
    MiningOptions mo;
    mo.m = c.train.m;
    mo.pin = c.pin;
    mo.seed = c.seed;
    mo.construction = c.construction;
    mo.workers = c.mining_workers;
    auto miner = c.mining == MiningKind::kGlobal ? StyleMiner::global(*encoder, prompts, mo)
                                                 : StyleMiner(*encoder, prompts, data.class_names, mo);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto added = miner.mine_batch(batches[b], b);
      per_batch.push_back({{"batch", b}, {"images", batches[b].features.size()}, {"added", added}});
      say(progress, fmt::format("batch {}/{}: +{} styles", b + 1, batches.size(), added));
    }
    r.bank = miner.bank();
    std::set<std::string> used;
    json entries = json::array();
    for (const auto& rec : miner.records()) {
      used.insert(rec.pin.prompt.style_fragment);
      entries.push_back({{"batch", rec.batch},
                         {"patch_id", rec.patch_id},
                         {"class", r.bank.is_global() ? std::string(kGlobalStyleKey) : data.class_names.at(rec.class_id)},
                         {"prompt", rec.pin.prompt.rendered},
                         {"initial_distance", rec.pin.initial_cosine_distance},
                         {"final_distance", rec.pin.final_cosine_distance},
                         {"iterations", rec.pin.iterations_run},
                         {"loss_trace", rec.pin.loss_trace}});
    }
    log["prompt_set"] = prompts.id;
    log["prompt_variant"] = to_string(prompts.variant);
    log["fragments_available"] = prompts.cardinality();
    log["fragments_used"] = used.size();
    log["prompt_construction"] = to_string(c.construction);
    log["pin"] = {{"steps", c.pin.steps}, {"step_size", c.pin.step_size}, {"halve_on_increase", c.pin.halve_on_increase}};
    log["entries"] = entries;
  }
  json per_class = json::object();
  for (int k = 0; k < r.bank.num_classes(); ++k) per_class[r.bank.class_names()[k]] = r.bank.size(k);
  log["batches"] = per_batch;
  log["per_class_counts"] = per_class;
  log["total_entries"] = r.bank.total_entries();

  r.bank_path = bank_output_path(c);
  if (r.bank_path.has_parent_path()) fs::create_directories(r.bank_path.parent_path());
  save_bank(r.bank, r.bank_path);
  write_text(c.out / "mining_log.json", log.dump(2) + "\n");
  r.log = std::move(log);
  say(progress, fmt::format("wrote {} styles to {}", r.bank.total_entries(), r.bank_path.string()));
  return r;
}

namespace {

// Source styles and mined banks shared by the arms of one process.
class StyleCache {
 public:
  StyleCache(const ExperimentConfig& base, const RunData& data) : base_(base), data_(data) {}

  StyleSets sets_for(const ExperimentConfig& c, const Progress& progress) {
    StyleSets sets;
    const auto& mode = c.train.mode;
    if (mode.needs_source_styles()) {
      const auto key = fmt::format("S/m={}", c.train.m);
      if (!banks_.count(key)) banks_.emplace(key, build_source_style_set(batches(c), c.train.m, data_.class_names));
      sets.source = &banks_.at(key);
    }
    if (mode.needs_mined_bank()) {
      std::string key;
      if (mode.variant == AugmentVariant::kNoise) {
        key = fmt::format("noise/m={}/snr={}", c.train.m, mode.snr_db);
      } else {
        key = fmt::format("{}/m={}/R={}/{}", mode.locality == Locality::kGlobal ? "global" : "local", c.train.m,
                          c.prompt_count, c.prompts.string());
      }
      if (!banks_.count(key)) {
        say(progress, fmt::format("mining bank {}", key));
        banks_.emplace(key, mine(c));
      }
      sets.mined = &banks_.at(key);
    }
    return sets;
  }

 private:
  const std::vector<FeatureBatch>& batches(const ExperimentConfig& c) {
    if (!encoder_) {
      encoder_ = make_encoder(base_.encoder, base_.encoder_seed);
      batches_ = extract_feature_batches(*encoder_, data_.train, base_.mining_batch);
    }
    (void)c;
    return batches_;
  }

  StyleBank mine(const ExperimentConfig& c) {
    const auto& fb = batches(c);
    const auto& mode = c.train.mode;
    if (mode.variant == AugmentVariant::kNoise) return mine_noise_bank(fb, data_.class_names, c.train.m, mode.snr_db, base_.seed);
    MiningOptions mo;
    mo.m = c.train.m;
    mo.pin = c.pin;
    mo.seed = base_.seed;
    mo.construction = c.construction;
    mo.workers = c.mining_workers;
    const auto prompts = resolve_prompts(c);
    if (mode.locality == Locality::kGlobal) return mine_global(fb, prompts, *encoder_, mo);
    return mine_style_banks(fb, prompts, data_.class_names, *encoder_, mo);
  }

  const ExperimentConfig& base_;
  const RunData& data_;
  std::unique_ptr<JointEncoder> encoder_;
  std::vector<FeatureBatch> batches_;
  std::map<std::string, StyleBank> banks_;
};

std::vector<std::string> read_log_prefix(const fs::path& log, std::int64_t before) {
  std::vector<std::string> kept;
  std::ifstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      if (json::parse(line).at("iter").get<std::int64_t>() < before) kept.push_back(line);
    } catch (const json::exception&) {
      break;
    }
  }
  return kept;
}

}  // namespace

TrainResult cmd_train(const ExperimentConfig& c, const Progress& progress) {
  validate_config(c, Command::kTrain);
  const auto data = load_run_data(c, false);
  const auto mc = resolve_model_config(c, static_cast<int>(data.class_names.size()));
  const auto tc = resolve_train_config(c);

  StyleBank mined, source;
  StyleSets sets;
  if (tc.mode.needs_mined_bank()) {
    mined = load_bank(c.bank);
    if (!mined.is_global() && mined.class_names() != data.class_names) {
      throw ConfigError(fmt::format("bank: '{}' was mined for different classes", c.bank.string()));
    }
    sets.mined = &mined;
  }
  if (tc.mode.needs_source_styles()) {
    auto encoder = make_encoder(c.encoder, c.encoder_seed);
    source = build_source_style_set(extract_feature_batches(*encoder, data.train, c.mining_batch), tc.m, data.class_names);
    sets.source = &source;
  }

  auto model = build_model(mc, c.seed);
  Trainer trainer(model, tc, sets);
  const auto ckpt = checkpoint_path(c);
  const auto log_path = c.out / "train_log.jsonl";
  std::vector<std::string> previous;
  if (c.resume && fs::is_regular_file(ckpt / "meta.json")) {
    trainer.load_checkpoint(ckpt);
    previous = read_log_prefix(log_path, trainer.iteration());
    say(progress, fmt::format("resumed from {} at iteration {}", ckpt.string(), trainer.iteration()));
  }
  fs::create_directories(c.out);
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError(fmt::format("cannot write {}", log_path.string()));
  for (const auto& line : previous) log << line << '\n';

  TrainResult r;
  r.checkpoint = ckpt;
  const std::int64_t every = c.checkpoint_every > 0 ? c.checkpoint_every : tc.iterations;
  const std::int64_t report_every = std::max<std::int64_t>(1, tc.iterations / 10);
  auto on_step = [&](const StepRecord& rec) {
    log << rec.to_json().dump() << '\n';
    r.final_loss = rec.loss;
    if ((rec.iteration + 1) % report_every == 0) {
      say(progress, fmt::format("iter {}/{} [{}] loss {:.4f}", rec.iteration + 1, tc.iterations, rec.phase, rec.loss));
    }
  };
  const std::int64_t end = c.stop_at > 0 ? std::min(c.stop_at, tc.iterations) : tc.iterations;
  while (trainer.iteration() < end) {
    trainer.run(data.train, on_step, std::min(trainer.iteration() + every, end));
    log.flush();
    trainer.save_checkpoint(ckpt);
    write_text(ckpt / "model.json", model_config_to_json(mc, data.class_names).dump(2) + "\n");
  }
  if (!fs::is_regular_file(ckpt / "model.json")) {
    trainer.save_checkpoint(ckpt);
    write_text(ckpt / "model.json", model_config_to_json(mc, data.class_names).dump(2) + "\n");
  }
  write_text(c.out / "train_config.txt", dump_config(c));
  r.iterations = trainer.iteration();
  say(progress, fmt::format("checkpoint: {}", ckpt.string()));
  return r;
}

namespace {

SegModel load_checkpoint_model(const fs::path& dir, const std::vector<std::string>& class_names) {
  std::vector<std::string> names;
  const auto mc = model_config_from_json(read_json(dir / "model.json"), &names);
  if (names != class_names) {
    throw ConfigError(fmt::format("checkpoint '{}' was trained on different classes", dir.string()));
  }
  auto model = build_model(mc, 0);
  try {
    torch::load(model, (dir / "model.pt").string());
  } catch (const c10::Error& e) {
    throw LoadError(fmt::format("{}: {}", dir.string(), e.what_without_backtrace()));
  }
  return model;
}

std::string render_tables(const std::vector<Table>& tables, bool tsv) {
  std::string out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) out += "\n";
    out += tsv ? to_tsv(tables[i]) : to_text(tables[i]);
  }
  return out;
}

}  // namespace

EvalResult cmd_eval(const ExperimentConfig& c, const Progress& progress) {
  validate_config(c, Command::kEval);
  const auto data = load_run_data(c, true);
  const auto paths = c.checkpoints.empty() ? std::vector<fs::path>{c.checkpoint} : c.checkpoints;
  EvalResult r;
  std::vector<std::string> labels;
  for (const auto& p : paths) {
    auto model = load_checkpoint_model(p, data.class_names);
    labels.push_back(p.string());
    for (const auto& split : c.eval_splits) {
      auto rep = evaluate(model, data.eval.at(split), data.class_names, split, c.eval_batch);
      say(progress, fmt::format("{} on {}: mIoU {:.2f}", p.string(), split, 100.0 * rep.miou));
      r.reports[split].push_back(std::move(rep));
    }
  }
  json splits = json::object();
  std::vector<Table> tables;
  for (const auto& split : c.eval_splits) {
    const auto& reps = r.reports.at(split);
    r.summaries[split] = multi_run_summary(reps);
    json runs = json::array();
    for (const auto& rep : reps) runs.push_back(to_json(rep));
    splits[split] = {{"reports", runs}, {"summary", to_json(r.summaries[split])}};
    tables.push_back(eval_table(reps, labels));
  }
  std::vector<std::string> ckpts;
  for (const auto& p : paths) ckpts.push_back(p.string());
  const json out{{"checkpoints", ckpts}, {"classes", data.class_names}, {"splits", splits}};
  write_text(c.out / "eval.json", out.dump(2) + "\n");
  write_text(c.out / "eval.tsv", render_tables(tables, true));
  write_text(c.out / "eval.txt", render_tables(tables, false));
  return r;
}

std::vector<AblationArm> ablation_arms(const ExperimentConfig& base) {
  std::vector<AblationArm> arms;
  auto famix_mode = [](ExperimentConfig& c) {
    c.train.mode.variant = AugmentVariant::kLanguage;
    c.train.mode.mix = true;
    c.train.mode.mix_source = MixSource::kT;
    c.train.mode.locality = Locality::kLocal;
  };
  const std::string& kind = base.ablation;
  if (kind == "table5") {
    for (bool freeze : {false, true}) {
      for (bool augment : {false, true}) {
        for (bool mix : {false, true}) {
          AblationArm a;
          a.name = fmt::format("freeze={} augment={} mix={}", freeze ? "on" : "off", augment ? "on" : "off", mix ? "on" : "off");
          a.factors = {{"Freeze", freeze ? "✓" : "✗"}, {"Augment", augment ? "✓" : "✗"}, {"Mix", mix ? "✓" : "✗"}};
          a.apply = [=](ExperimentConfig& c) {
            famix_mode(c);
            c.train.freeze = freeze ? FreezePreset::kFamix : FreezePreset::kFT;
            c.train.mode.variant = augment ? AugmentVariant::kLanguage : AugmentVariant::kNone;
            c.train.mode.mix = mix;
            // Mixing without synthetic styles mixes with other source styles.
            c.train.mode.mix_source = augment ? MixSource::kT : MixSource::kS;
          };
          arms.push_back(std::move(a));
        }
      }
    }
  } else if (kind == "freeze" || kind == "protocols") {
    const auto presets = kind == "freeze"
                             ? freeze_sweep_presets()
                             : std::vector<FreezePreset>{FreezePreset::kDP, FreezePreset::kFT, FreezePreset::kDPFT,
                                                         FreezePreset::kFamix};
    for (auto p : presets) {
      arms.push_back({to_string(p), {{kind == "freeze" ? "frozen" : "protocol", to_string(p)}}, [=](ExperimentConfig& c) {
                        famix_mode(c);
                        c.train.freeze = p;
                      }});
    }
  } else if (kind == "prompts") {
    for (auto n : base.prompt_counts) {
      arms.push_back({fmt::format("|R|={}", n), {{"|R|", std::to_string(n)}}, [=](ExperimentConfig& c) {
                        famix_mode(c);
                        c.prompt_count = n;
                      }});
    }
  } else if (kind == "sets") {
    for (auto s : {MixSource::kS, MixSource::kST, MixSource::kT}) {
      arms.push_back({"sample from " + to_string(s), {{"styles", to_string(s)}}, [=](ExperimentConfig& c) {
                        famix_mode(c);
                        c.train.mode.mix_source = s;
                      }});
    }
  } else if (kind == "noise") {
    for (double snr : base.snr_values) {
      arms.push_back({fmt::format("noise snr={}dB", snr), {{"augmentation", fmt::format("noise {} dB", snr)}},
                      [=](ExperimentConfig& c) {
                        famix_mode(c);
                        c.train.mode.variant = AugmentVariant::kNoise;
                        c.train.mode.snr_db = snr;
                      }});
    }
    arms.push_back({"language", {{"augmentation", "language"}}, famix_mode});
  } else if (kind == "locality") {
    for (auto l : {Locality::kGlobal, Locality::kLocal}) {
      arms.push_back({to_string(l), {{"mining", to_string(l)}}, [=](ExperimentConfig& c) {
                        famix_mode(c);
                        c.train.mode.locality = l;
                      }});
    }
  } else {
    throw ConfigError(fmt::format("ablation: unknown kind '{}'", kind));
  }
  if (base.arms.empty()) return arms;
  std::vector<AblationArm> kept;
  for (const auto& name : base.arms) {
    const auto it = std::find_if(arms.begin(), arms.end(), [&](const AblationArm& a) { return a.name == name; });
    if (it == arms.end()) throw ConfigError(fmt::format("arms: '{}' is not an arm of ablation {}", name, kind));
    kept.push_back(*it);
  }
  return kept;
}

AblationResult cmd_ablate(const ExperimentConfig& c, const Progress& progress) {
  validate_config(c, Command::kAblate);
  const auto data = load_run_data(c, true);
  const auto mc = resolve_model_config(c, static_cast<int>(data.class_names.size()));
  const auto arms = ablation_arms(c);
  const auto seeds = c.run_seeds();
  StyleCache cache(c, data);
  AblationResult r;

  for (auto seed : seeds) {
    for (const auto& arm : arms) {
      ArmResult run;
      run.arm = arm.name;
      run.seed = seed;
      try {
        ExperimentConfig ac = c;
        arm.apply(ac);
        ac.seed = seed;
        const auto tc = resolve_train_config(ac);
        tc.validate();
        const auto sets = cache.sets_for(ac, progress);
        auto model = build_model(mc, seed);
        Trainer trainer(model, tc, sets);
        trainer.run(data.train, [&](const StepRecord& rec) { run.final_loss = rec.loss; });
        for (const auto& split : c.eval_splits) {
          run.miou[split] = evaluate(model, data.eval.at(split), data.class_names, split, c.eval_batch).miou;
        }
        std::string line = fmt::format("seed {} | {} | loss {:.4f}", seed, arm.name, run.final_loss);
        for (const auto& [split, v] : run.miou) line += fmt::format(" | {} {:.2f}", split, 100.0 * v);
        say(progress, line);
      } catch (const Error& e) {
        run.error = fmt::format("{}: {}", to_string(e.kind()), e.what());
      } catch (const c10::Error& e) {
        run.error = fmt::format("torch: {}", e.what_without_backtrace());
      }
      if (run.error) {
        say(progress, fmt::format("seed {} | {} | FAILED: {}", seed, arm.name, *run.error));
        r.failed.push_back(fmt::format("{} (seed {}): {}", arm.name, seed, *run.error));
      }
      r.runs.push_back(std::move(run));
    }
  }

  Table table;
  for (const auto& f : arms.front().factors) table.header.push_back(f.first);
  for (const auto& split : c.eval_splits) table.header.push_back("mIoU " + split);
  table.header.push_back("runs");
  json arms_json = json::array();
  LinePlot plot;
  plot.x_label = arms.front().factors.front().first;
  plot.y_label = "mIoU (%)";
  plot.title = fmt::format("{} sweep ({} seed{})", c.ablation, seeds.size(), seeds.size() == 1 ? "" : "s");
  std::map<std::string, PlotSeries> series;
  for (const auto& arm : arms) {
    std::vector<std::string> row;
    json factors = json::object();
    for (const auto& [k, v] : arm.factors) {
      row.push_back(v);
      factors[k] = v;
    }
    json runs = json::array(), summary = json::object();
    std::size_t ok = 0;
    for (const auto& run : r.runs) {
      if (run.arm != arm.name) continue;
      json j{{"seed", run.seed}, {"miou", run.miou}, {"final_loss", run.final_loss}};
      if (run.error) j["error"] = *run.error;
      runs.push_back(j);
      if (!run.error) ++ok;
    }
    for (const auto& split : c.eval_splits) {
      std::vector<double> v;
      for (const auto& run : r.runs) {
        if (run.arm == arm.name && !run.error) v.push_back(run.miou.at(split));
      }
      std::optional<double> mean;
      if (v.empty()) {
        row.push_back("failed");
      } else {
        const auto [m, s] = mean_and_sample_std(v);
        mean = m;
        row.push_back(v.size() == 1 ? format_iou(m) : format_mean_std(m, s));
        summary[split] = {{"mean", m}, {"std", s}, {"runs", v.size()}};
      }
      series[split].name = split;
      series[split].values.push_back(mean ? std::optional<double>(100.0 * *mean) : std::nullopt);
    }
    row.push_back(fmt::format("{}/{}", ok, seeds.size()));
    table.add_row(std::move(row));
    plot.x_ticks.push_back(arm.factors.front().second);
    arms_json.push_back({{"name", arm.name}, {"factors", factors}, {"runs", runs}, {"summary", summary}});
  }
  for (const auto& split : c.eval_splits) plot.series.push_back(series.at(split));

  const json out{{"ablation", c.ablation}, {"seeds", seeds},     {"splits", c.eval_splits},
                 {"arms", arms_json},      {"failed", r.failed}, {"train", resolve_train_config(c).to_json()}};
  const auto stem = c.out / ("ablation_" + c.ablation);
  write_text(stem.string() + ".json", out.dump(2) + "\n");
  write_text(stem.string() + ".tsv", to_tsv(table));
  std::string text = to_text(table);
  if (!r.failed.empty()) {
    text += "\nfailed arms:\n";
    for (const auto& f : r.failed) text += "  " + f + "\n";
  }
  write_text(stem.string() + ".txt", text);
  if (c.ablation == "freeze" || c.ablation == "prompts" || c.ablation == "noise") {
    write_text(stem.string() + ".svg", render_svg(plot));
  }
  return r;
}

json cmd_report(const ExperimentConfig& c, const Progress& progress) {
  validate_config(c, Command::kReport);
  Table table;
  table.header = {"run", "dataset", "checkpoints", "mIoU"};
  json runs = json::array();
  std::vector<std::string> classes;
  for (const auto& dir : c.inputs) {
    const auto j = read_json(dir / "eval.json");
    json splits = json::object();
    try {
      for (const auto& [split, v] : j.at("splits").items()) {
        std::vector<EvalReport> reps;
        for (const auto& rj : v.at("reports")) reps.push_back(eval_report_from_json(rj));
        if (reps.empty()) continue;
        if (classes.empty()) {
          classes = reps.front().class_names;
          for (const auto& n : classes) table.header.push_back(n);
        } else if (reps.front().class_names != classes) {
          throw ConfigError(fmt::format("inputs: '{}' uses different classes", dir.string()));
        }
        const auto s = multi_run_summary(reps);
        std::vector<std::string> row = {dir.string(), split, std::to_string(s.runs),
                                        s.single_run ? format_iou(s.miou_mean) : format_mean_std(s.miou_mean, s.miou_std)};
        for (std::size_t k = 0; k < s.per_class_mean.size(); ++k) {
          row.push_back(!s.per_class_mean[k]    ? "-"
                        : s.single_run          ? format_iou(s.per_class_mean[k])
                                                : format_mean_std(*s.per_class_mean[k], s.per_class_std[k].value_or(0.0)));
        }
        table.add_row(std::move(row));
        splits[split] = to_json(s);
      }
    } catch (const json::exception& e) {
      throw LoadError(fmt::format("{}: {}", (dir / "eval.json").string(), e.what()));
    }
    runs.push_back({{"run", dir.string()}, {"splits", splits}});
    say(progress, fmt::format("read {}", (dir / "eval.json").string()));
  }
  const json out{{"classes", classes}, {"runs", runs}};
  write_text(c.out / "report.json", out.dump(2) + "\n");
  write_text(c.out / "report.tsv", to_tsv(table));
  write_text(c.out / "report.txt", to_text(table));
  return out;
}

}  // namespace famix
