#include <doctest.h>

#include <set>

#include "famix/bank/bank_file.hpp"
#include "famix/cli/commands.hpp"
#include "famix/cli/config.hpp"
#include "famix/cli/report.hpp"
#include "famix/error.hpp"
#include "test_util.hpp"

using namespace famix;

namespace {

// Small, fast desk config writing into `out`.
ExperimentConfig tiny_config(const std::filesystem::path& out) {
  auto c = default_config(Profile::kDesk, data_dir());
  c.out = out;
  c.synthetic.train_images = 16;
  c.synthetic.val_images = 8;
  c.pin.steps = 3;
  c.train.iterations = 6;
  c.train.batch_size = 4;
  return c;
}

}  // namespace

TEST_CASE("profiles carry their defaults") {
  const auto desk = default_config(Profile::kDesk, data_dir());
  const auto paper = default_config(Profile::kPaper, data_dir());
  CHECK(desk.train.m == 16);
  CHECK(paper.train.m == 16);
  CHECK(paper.train.iterations == 40000);
  CHECK(paper.train.jitter.crop == 768);
  CHECK(paper.encoder == "tiny-clip-paper");
  CHECK(paper.model.head.atrous_rates == std::vector<int>{6, 12, 18});
  CHECK(paper.run_seeds().size() == 3);
  CHECK(desk.run_seeds() == std::vector<std::uint64_t>{0});
  CHECK(std::filesystem::is_regular_file(desk.prompts));
  CHECK(parse_profile("paper") == Profile::kPaper);
  CHECK_THROWS_AS(parse_profile("laptop"), ConfigError);
}

TEST_CASE("every documented key is settable and unknown keys are named") {
  std::set<std::string> names;
  for (const auto& k : config_keys()) {
    CHECK_FALSE(k.help.empty());
    CHECK(names.insert(k.name).second);
  }
  CHECK(names.count("augment"));
  CHECK(names.count("freeze"));
  ExperimentConfig c;
  try {
    set_config_value(c, "learning_rate", "1");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
}

TEST_CASE("config values are parsed (table)") {
  struct Row {
    const char* key;
    const char* value;
    bool ok;
  };
  const Row rows[] = {
      {"seed", "42", true},          {"seed", "-1", false},          {"seed", "4x", false},
      {"seeds", "0,1,2", true},      {"seeds", "", false},           {"m", "16", true},
      {"m", "12", false},            {"m", "0", false},              {"snr_db", "inf", true},
      {"snr_db", "20", true},        {"snr_db", "loud", false},      {"augment", "language", true},
      {"augment", "noise", true},    {"augment", "none", true},      {"augment", "mixstyle", true},
      {"augment", "random", false},  {"mix", "on", true},            {"mix", "off", true},
      {"mix", "maybe", false},       {"mix_source", "S∪T", true},    {"mix_source", "U", false},
      {"locality", "global", true},  {"locality", "city", false},    {"freeze", "L1-4'", true},
      {"freeze", "L9", false},       {"mix_probability", "0.5", true}, {"mix_probability", "2", false},
      {"iterations", "0", false},    {"iterations", "100", true},    {"lr_decoder", "-1", false},
      {"momentum", "1", false},      {"probe_fraction", "0", false}, {"ablation", "table5", true},
      {"ablation", "table99", false}, {"prompt_counts", "1,5", true}, {"prompt_counts", "0", false},
      {"encoder", "stub", true},     {"encoder", "resnet", false},   {"prompt_construction", "style", true},
      {"prompt_construction", "poem", false}, {"mining", "noise", true}, {"mining", "deep", false},
      {"alpha_shape", "per_channel", true},   {"alpha_shape", "matrix", false},
      {"empty_class", "error", true},         {"empty_class", "ignore", false},
      {"pin_step_size", "0", false},          {"crop", "-4", false},
  };
  for (const auto& r : rows) {
    CAPTURE(r.key);
    CAPTURE(r.value);
    ExperimentConfig c;
    if (r.ok) {
      CHECK_NOTHROW(set_config_value(c, r.key, r.value));
    } else {
      try {
        set_config_value(c, r.key, r.value);
        FAIL("expected ConfigError");
      } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(r.key) != std::string::npos);
      }
    }
  }
  ExperimentConfig c;
  set_config_value(c, "snr_db", "inf");
  CHECK(std::isinf(c.train.mode.snr_db));
  set_config_value(c, "mix_source", "S+T");
  CHECK(c.train.mode.mix_source == MixSource::kST);
}

TEST_CASE("config files: comments, blank lines and line-numbered errors") {
  ExperimentConfig c;
  apply_config_text(c, "# desk run\n\niterations = 50  # short\naugment=none\nmix = on\nmix_source = S\n", "run.cfg");
  CHECK(c.train.iterations == 50);
  CHECK(c.train.mode.variant == AugmentVariant::kNone);
  CHECK(c.train.mode.mix_source == MixSource::kS);
  try {
    apply_config_text(c, "iterations = 5\nwat\n", "run.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config_file(c, "/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("validation catches mode and file inconsistencies before any model is built (table)") {
  TempDir dir;
  write_bytes(dir.path() / "bank.fsb", {1, 2, 3});
  struct Row {
    const char* name;
    Command command;
    std::vector<std::pair<std::string, std::string>> sets;
    bool ok;
  };
  const std::string bank = (dir.path() / "bank.fsb").string();
  const std::vector<Row> rows = {
      {"language without bank", Command::kTrain, {}, false},
      {"language with missing bank file", Command::kTrain, {{"bank", "/nonexistent.fsb"}}, false},
      {"language with bank", Command::kTrain, {{"bank", bank}}, true},
      {"baseline needs no bank", Command::kTrain, {{"augment", "none"}, {"mix", "off"}}, true},
      {"mix without styles must use S", Command::kTrain, {{"augment", "none"}, {"mix", "on"}, {"mix_source", "T"}}, false},
      {"mix without styles from S", Command::kTrain, {{"augment", "none"}, {"mix", "on"}, {"mix_source", "S"}}, true},
      {"mixstyle needs mix", Command::kTrain, {{"augment", "mixstyle"}, {"mix", "off"}}, false},
      {"mixstyle per-channel alpha", Command::kTrain, {{"augment", "mixstyle"}, {"alpha_shape", "per_channel"}}, false},
      {"noise with S", Command::kTrain, {{"augment", "noise"}, {"mix_source", "S"}, {"bank", bank}}, false},
      {"global with S", Command::kTrain, {{"locality", "global"}, {"mix_source", "S"}}, false},
      {"resume with the default checkpoint", Command::kTrain, {{"augment", "none"}, {"mix", "off"}, {"resume", "on"}}, true},
      {"stub cannot train", Command::kTrain, {{"augment", "none"}, {"mix", "off"}, {"encoder", "stub"}}, false},
      {"DP_FT too short", Command::kTrain, {{"augment", "none"}, {"mix", "off"}, {"freeze", "DP_FT"}, {"iterations", "1"}}, false},
      {"mine with missing prompts", Command::kMine, {{"prompts", "/nonexistent.txt"}}, false},
      {"noise mining needs no prompts", Command::kMine, {{"prompts", "/nonexistent.txt"}, {"mining", "noise"}}, true},
      {"missing manifest", Command::kMine, {{"dataset", "/nonexistent/manifest.txt"}}, false},
      {"eval without checkpoint", Command::kEval, {}, false},
      {"eval with non-checkpoint dir", Command::kEval, {{"checkpoint", dir.path().string()}}, false},
      {"report without inputs", Command::kReport, {}, false},
      {"report input lacks eval.json", Command::kReport, {{"inputs", dir.path().string()}}, false},
      {"ablate defaults", Command::kAblate, {}, true},
      {"synth always valid", Command::kSynth, {}, true},
  };
  for (const auto& r : rows) {
    CAPTURE(r.name);
    auto c = default_config(Profile::kDesk, data_dir());
    for (const auto& [k, v] : r.sets) set_config_value(c, k, v);
    if (r.ok) {
      CHECK_NOTHROW(validate_config(c, r.command));
    } else {
      CHECK_THROWS_AS(validate_config(c, r.command), ConfigError);
    }
  }
}

TEST_CASE("config dump is stable and sorted") {
  const auto c = default_config(Profile::kDesk, data_dir());
  const auto a = dump_config(c);
  CHECK(a == dump_config(c));
  CHECK(a.find("train.iterations = 300") != std::string::npos);
  CHECK(a.find("ablation = table5") < a.find("train.batch_size"));
}

TEST_CASE("tables render as TSV and aligned text") {
  Table t;
  t.header = {"arm", "mIoU"};
  t.add_row({"baseline", "31.20"});
  t.add_row({"full ✓", "33.05 ± 0.40"});
  CHECK(to_tsv(t) == "arm\tmIoU\nbaseline\t31.20\nfull ✓\t33.05 ± 0.40\n");
  const auto text = to_text(t);
  CHECK(text.find("baseline  31.20") != std::string::npos);
  CHECK(text.find("full ✓    33.05") != std::string::npos);
  CHECK_THROWS_AS(t.add_row({"short"}), InvalidInputError);
}

TEST_CASE("eval table keeps class order and adds a mean ± std row") {
  EvalReport a{"val", {"road", "sidewalk", "building"}, {0.5, std::nullopt, 0.7}, 0.6};
  EvalReport b{"val", {"road", "sidewalk", "building"}, {0.7, std::nullopt, 0.9}, 0.8};
  const auto t = eval_table({a, b}, {"s0", "s1"});
  CHECK(t.header == std::vector<std::string>{"dataset", "run", "road", "sidewalk", "building", "mIoU"});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0][3] == "-");
  CHECK(t.rows[2][1] == "mean ± std");
  CHECK(t.rows[2][5] == "70.00 ± 14.14");
  const bool round_trip = eval_report_from_json(to_json(a)).per_class_iou == a.per_class_iou;
  CHECK(round_trip);
  CHECK(eval_table({a}, {"s0"}).rows.size() == 1);
}

TEST_CASE("svg plots contain one polyline per series and skip failed points") {
  LinePlot p;
  p.title = "freeze sweep";
  p.x_label = "frozen";
  p.y_label = "mIoU";
  p.x_ticks = {"L1", "L1-2", "L1-3"};
  p.series = {{"val_shifted", {30.0, 31.0, 29.0}}, {"val_source", {80.0, std::nullopt, 82.0}}};
  const auto svg = render_svg(p);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::size_t lines = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
  CHECK(lines == 3);
  CHECK(svg.find("L1-2") != std::string::npos);
  CHECK(render_svg(p) == svg);
}

TEST_CASE("table5 ablation enumerates the 2x2x2 freeze/augment/mix grid") {
  auto base = default_config(Profile::kDesk, data_dir());
  const auto arms = ablation_arms(base);
  REQUIRE(arms.size() == 8);
  std::set<std::string> combos;
  for (const auto& a : arms) {
    REQUIRE(a.factors.size() == 3);
    combos.insert(a.factors[0].second + a.factors[1].second + a.factors[2].second);
    auto c = base;
    a.apply(c);
    CHECK_NOTHROW(c.train.mode.validate());
    const bool freeze = a.factors[0].second == "✓", augment = a.factors[1].second == "✓", mix = a.factors[2].second == "✓";
    CHECK((c.train.freeze == FreezePreset::kFamix) == freeze);
    CHECK((c.train.mode.variant == AugmentVariant::kLanguage) == augment);
    CHECK(c.train.mode.mix == mix);
    if (freeze && !augment && !mix) CHECK(c.train.mode.passthrough());
  }
  CHECK(combos.size() == 8);
  base.ablation = "freeze";
  CHECK(ablation_arms(base).size() == 5);
  base.ablation = "prompts";
  CHECK(ablation_arms(base).size() == 4);
  base.ablation = "noise";
  CHECK(ablation_arms(base).size() == 5);
  base.ablation = "sets";
  CHECK(ablation_arms(base).size() == 3);
}

TEST_CASE("mine writes a byte-identical bank and a log of the available fragments") {
  TempDir dir;
  auto c = tiny_config(dir.path() / "a");
  c.prompt_count = 20;
  const auto r = cmd_mine(c);
  CHECK(r.log.at("fragments_available") == 20);
  std::size_t from_batches = 0;
  for (const auto& b : r.log.at("batches")) from_batches += b.at("added").get<std::size_t>();
  CHECK(from_batches == r.bank.total_entries());
  CHECK(r.log.at("entries").size() == r.bank.total_entries());
  CHECK(r.log.at("entries").at(0).at("loss_trace").size() >= 1);
  auto c2 = c;
  c2.out = dir.path() / "b";
  const auto r2 = cmd_mine(c2);
  CHECK(read_bytes(r.bank_path) == read_bytes(r2.bank_path));
  CHECK(read_bytes(dir.path() / "a" / "mining_log.json") == read_bytes(dir.path() / "b" / "mining_log.json"));
  CHECK(load_bank(r.bank_path) == r.bank);
}

TEST_CASE("mining a toy two-class dataset stores styles only for present classes") {
  TempDir dir;
  auto c = tiny_config(dir.path());
  c.synthetic.train_images = 4;
  c.dataset = cmd_synth(c).string();
  // Relabel every scene to classes {0, 1} of a two-class problem.
  const auto entries = load_manifest(c.dataset);
  for (const auto& e : entries) {
    if (e.split != "train") continue;
    auto l = read_label_pgm(e.label, 4);
    for (auto& v : l.data()) v = v == 3 ? 255 : std::min(v, 1);
    write_label_pgm(l, e.label);
  }
  write_file(dir.path() / "two.txt", "road\nbuilding\n");
  c.classes = dir.path() / "two.txt";
  c.prompt_count = 1;
  const auto r = cmd_mine(c);
  CHECK(r.bank.num_classes() == 2);
  CHECK(r.bank.size(0) > 0);
  CHECK(r.bank.size(1) > 0);
  CHECK(r.log.at("fragments_available") == 1);
  CHECK(r.log.at("fragments_used") == 1);
}

TEST_CASE("noise and global mining through the command") {
  TempDir dir;
  auto c = tiny_config(dir.path());
  c.mining = MiningKind::kNoise;
  c.train.mode.snr_db = 10.0;
  const auto noise = cmd_mine(c);
  CHECK(noise.bank.metadata().source == StyleSource::kNoise);
  CHECK(noise.log.at("snr_db") == 10.0);
  c.mining = MiningKind::kGlobal;
  c.bank = dir.path() / "global.fsb";
  const auto global = cmd_mine(c);
  CHECK(global.bank.is_global());
  CHECK(global.bank.total_entries() == 16);
}

TEST_CASE("train, resume and eval through the commands") {
  TempDir dir;
  auto c = tiny_config(dir.path() / "run");
  c.train.mode.variant = AugmentVariant::kNone;
  c.train.mode.mix = true;
  c.train.mode.mix_source = MixSource::kS;
  c.train.iterations = 30;
  const auto r = cmd_train(c);
  CHECK(r.iterations == 30);
  const auto log = read_bytes(c.out / "train_log.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 30);

  // Idempotent rerun into another directory.
  auto again = c;
  again.out = dir.path() / "again";
  cmd_train(again);
  CHECK(read_bytes(again.out / "train_log.jsonl") == log);

  // Interrupted run: stopped at 15 with a checkpoint, then resumed to 30.
  auto part = c;
  part.out = dir.path() / "part";
  part.resume = true;
  part.checkpoint = part.out / "ckpt";
  part.stop_at = 15;
  CHECK(cmd_train(part).iterations == 15);
  CHECK(read_bytes(part.out / "train_log.jsonl") != log);
  part.stop_at = 0;
  CHECK(cmd_train(part).iterations == 30);
  CHECK(read_bytes(part.out / "train_log.jsonl") == log);
  CHECK(read_bytes(part.checkpoint / "model.pt") == read_bytes(r.checkpoint / "model.pt"));
  cmd_train(part);
  CHECK(read_bytes(part.out / "train_log.jsonl") == log);

  auto ev = c;
  ev.checkpoint = r.checkpoint;
  ev.eval_splits = {"train", "val_source", "val_shifted"};
  const auto e = cmd_eval(ev);
  REQUIRE(e.reports.at("train").size() == 1);
  CHECK(e.reports.at("train")[0].miou >= e.reports.at("val_shifted")[0].miou);
  CHECK(e.summaries.at("train").single_run);
  CHECK(std::filesystem::is_regular_file(c.out / "eval.tsv"));

  auto multi = ev;
  multi.out = dir.path() / "multi";
  multi.checkpoints = {r.checkpoint, again.out / "checkpoint"};
  const auto m = cmd_eval(multi);
  CHECK(m.summaries.at("val_source").runs == 2);
  CHECK(m.summaries.at("val_source").miou_std == doctest::Approx(0.0));

  auto rep = c;
  rep.out = dir.path() / "report";
  rep.inputs = {c.out, multi.out};
  const auto j = cmd_report(rep);
  CHECK(j.at("runs").size() == 2);
  CHECK(std::filesystem::is_regular_file(rep.out / "report.txt"));
}

TEST_CASE("eval rejects checkpoints trained for other classes") {
  TempDir dir;
  auto c = tiny_config(dir.path());
  c.train.mode.variant = AugmentVariant::kNone;
  c.train.mode.mix = false;
  c.train.iterations = 1;
  const auto r = cmd_train(c);
  auto j = read_json(r.checkpoint / "model.json");
  j["classes"] = {"a", "b", "c", "d"};
  write_text(r.checkpoint / "model.json", j.dump());
  c.checkpoint = r.checkpoint;
  CHECK_THROWS_AS(cmd_eval(c), ConfigError);
}

TEST_CASE("ablation reports failed arms without aborting the others") {
  TempDir dir;
  auto c = tiny_config(dir.path());
  c.ablation = "prompts";
  c.prompt_counts = {2, 1000};
  c.train.iterations = 2;
  const auto r = cmd_ablate(c);
  REQUIRE(r.runs.size() == 2);
  CHECK_FALSE(r.runs[0].error);
  CHECK(r.runs[1].error);
  REQUIRE(r.failed.size() == 1);
  CHECK(r.failed[0].find("|R|=1000") != std::string::npos);
  const auto j = read_json(dir.path() / "ablation_prompts.json");
  CHECK(j.at("failed").size() == 1);
  CHECK(std::filesystem::is_regular_file(dir.path() / "ablation_prompts.svg"));
  CHECK(std::filesystem::is_regular_file(dir.path() / "ablation_prompts.tsv"));
}
