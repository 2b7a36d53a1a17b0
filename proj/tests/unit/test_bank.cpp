#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "famix/bank/bank_file.hpp"
#include "famix/bank/prompt_set.hpp"
#include "famix/bank/sampling.hpp"
#include "famix/error.hpp"
#include "test_util.hpp"

using namespace famix;

namespace {

StyleBank make_bank(std::uint64_t seed, int channels = 8, int classes = 4, int max_entries = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mu(-5.0, 5.0);
  std::uniform_real_distribution<double> sd(1e-6, 3.0);
  std::uniform_int_distribution<int> count(0, max_entries);
  std::vector<std::string> names;
  for (int k = 0; k < classes; ++k) names.push_back("class_" + std::to_string(k));
  MiningMetadata md;
  md.prompt_set_id = "r1_random_style";
  md.pin_steps = 100;
  md.pin_step_size = 1.0;
  md.seed = seed;
  md.patches_m = 16;
  md.snr_db = 15.0;
  StyleBank bank(channels, names, md);
  for (int k = 0; k < classes; ++k) {
    const int n = count(rng);
    for (int e = 0; e < n; ++e) {
      StyleEntry entry;
      for (int c = 0; c < channels; ++c) {
        entry.style.mu.push_back(mu(rng));
        entry.style.sigma.push_back(sd(rng));
      }
      entry.prompt = "Ethereal Mist style class_" + std::to_string(k);
      entry.source_patch_id = make_patch_id(static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(k));
      entry.final_cosine_distance = 0.25;
      entry.iterations = 100;
      bank.add(k, entry);
    }
  }
  return bank;
}

void put_u32(std::vector<std::uint8_t>& bytes, std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[off + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void reseal(std::vector<std::uint8_t>& bytes) {
  const std::size_t payload = bytes.size() - 4;
  put_u32(bytes, payload, bank_checksum(std::span(bytes).first(payload)));
}

std::string load_error_message(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_bank(bytes);
  } catch (const LoadError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("quantize_style keeps sigma above epsilon") {
  const StyleStats s{{0.1}, {kEpsilonSigma}};
  const auto q = quantize_style(s);
  CHECK(q.sigma[0] >= kEpsilonSigma);
  CHECK(q.mu[0] == static_cast<double>(0.1f));
  CHECK(quantize_style(q) == q);
}

TEST_CASE("bank add validates entries") {
  StyleBank bank(2, {"a", "b"});
  CHECK_THROWS_AS(bank.add(2, StyleEntry{{{0, 0}, {1, 1}}}), InvalidInputError);
  CHECK_THROWS_AS(bank.add(0, StyleEntry{{{0}, {1}}}), ShapeError);
  CHECK_THROWS_AS(bank.add(0, StyleEntry{{{0, 0}, {1, 0}}}), InvalidInputError);
  bank.add(1, StyleEntry{{{0, 0}, {1, 1}}});
  CHECK(bank.size(0) == 0);
  CHECK(bank.size(1) == 1);
  CHECK(bank.total_entries() == 1);
  CHECK_THROWS_AS(StyleBank(0, {"a"}), ShapeError);
  CHECK_THROWS_AS(StyleBank(2, {}), ShapeError);
}

TEST_CASE("bank round trip preserves every field (property)") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto bank = make_bank(seed, 1 + static_cast<int>(seed % 9), 1 + static_cast<int>(seed % 5));
    const auto bytes = encode_bank(bank);
    const auto back = decode_bank(bytes);
    REQUIRE(back == bank);
    REQUIRE(encode_bank(back) == bytes);
  }
}

TEST_CASE("global bank round trip") {
  auto bank = StyleBank::global(3, "driving", {.source = StyleSource::kPrompt});
  bank.add(0, StyleEntry{{{1, 2, 3}, {0.5, 0.25, 2}}, "Neon Glow style driving", 7, 0.1, 100});
  CHECK(bank.is_global());
  const auto back = decode_bank(encode_bank(bank));
  CHECK(back == bank);
  CHECK(back.is_global());
}

TEST_CASE("save_bank writes byte-identical files for identical banks") {
  TempDir dir;
  const auto a = make_bank(3);
  const auto b = make_bank(3);
  save_bank(a, dir.path() / "a.bank");
  save_bank(b, dir.path() / "b.bank");
  CHECK(read_bytes(dir.path() / "a.bank") == read_bytes(dir.path() / "b.bank"));
  CHECK(load_bank(dir.path() / "a.bank") == a);
}

TEST_CASE("empty classes survive a round trip") {
  StyleBank bank(2, {"a", "b", "c"});
  bank.add(2, StyleEntry{{{0, 1}, {1, 1}}});
  const auto back = decode_bank(encode_bank(bank));
  CHECK(back.size(0) == 0);
  CHECK(back.size(1) == 0);
  CHECK(back.size(2) == 1);
}

TEST_CASE("every truncation is rejected") {
  const auto bytes = encode_bank(make_bank(5, 3, 2, 2));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    const std::vector<std::uint8_t> prefix(bytes.begin(), bytes.begin() + static_cast<long>(n));
    REQUIRE_THROWS_AS(decode_bank(prefix), LoadError);
  }
}

TEST_CASE("trailing bytes are rejected") {
  auto bytes = encode_bank(make_bank(6));
  bytes.push_back(0);
  CHECK(load_error_message(bytes).find("trailing") != std::string::npos);
}

TEST_CASE("single-byte corruption anywhere is rejected") {
  const auto bytes = encode_bank(make_bank(7, 4, 3, 3));
  std::mt19937_64 rng(7);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto bad = bytes;
    bad[i] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    REQUIRE_THROWS_AS(decode_bank(bad), LoadError);
  }
}

TEST_CASE("header fuzz names the offending field") {
  const auto bytes = encode_bank(make_bank(8));
  const auto fields = describe_bank_header(bytes);
  REQUIRE(fields.size() >= 12);
  std::mt19937_64 rng(8);
  for (const auto& f : fields) {
    CAPTURE(f.name);
    for (int trial = 0; trial < 20; ++trial) {
      auto bad = bytes;
      for (std::size_t b = 0; b < f.size; ++b) bad[f.offset + b] = static_cast<std::uint8_t>(rng());
      if (bad == bytes) continue;
      // Unsealed: always rejected.
      REQUIRE_THROWS_AS(decode_bank(bad), LoadError);
      // Resealed with a valid checksum: either rejected with a LoadError or decoded into a
      // well-formed bank; never any other failure.
      reseal(bad);
      try {
        const auto bank = decode_bank(bad);
        bank.validate();
      } catch (const LoadError&) {
      }
    }
  }
}

TEST_CASE("named load errors") {
  const auto good = encode_bank(make_bank(9, 2, 2, 2));
  const auto fields = describe_bank_header(good);
  auto field = [&](const std::string& name) {
    for (const auto& f : fields)
      if (f.name == name) return f;
    FAIL("missing field " << name);
    return fields.front();
  };
  SUBCASE("magic") {
    auto b = good;
    b[0] = 'X';
    CHECK(load_error_message(b).find("magic") != std::string::npos);
  }
  SUBCASE("version") {
    auto b = good;
    put_u32(b, field("format_version").offset, 2);
    reseal(b);
    CHECK(load_error_message(b).find("format_version") != std::string::npos);
  }
  SUBCASE("channels") {
    auto b = good;
    put_u32(b, field("channels").offset, 0);
    reseal(b);
    CHECK(load_error_message(b).find("channels") != std::string::npos);
  }
  SUBCASE("kind") {
    auto b = good;
    b[field("kind").offset] = 9;
    reseal(b);
    CHECK(load_error_message(b).find("kind") != std::string::npos);
  }
  SUBCASE("source") {
    auto b = good;
    b[field("source").offset] = 9;
    reseal(b);
    CHECK(load_error_message(b).find("source") != std::string::npos);
  }
  SUBCASE("checksum") {
    auto b = good;
    b[field("seed").offset] ^= 1;
    CHECK(load_error_message(b).find("checksum") != std::string::npos);
  }
  SUBCASE("corrupted length") {
    auto b = good;
    put_u32(b, field("prompt_set_id length").offset, 0xfffffff0u);
    reseal(b);
    CHECK(load_error_message(b).find("corrupted length") != std::string::npos);
  }
}

TEST_CASE("sigma below epsilon in a resealed file is rejected with the entry named") {
  StyleBank bank(2, {"a", "b"});
  bank.add(1, StyleEntry{{{0, 1}, {1, 2}}, "p"});
  auto bytes = encode_bank(bank);
  // Locate class 1's first entry: its sigma[1] is the f32 2.0 (0x40000000).
  std::size_t off = 0;
  for (std::size_t i = 0; i + 4 <= bytes.size(); ++i) {
    if (bytes[i] == 0 && bytes[i + 1] == 0 && bytes[i + 2] == 0 && bytes[i + 3] == 0x40) off = i;
  }
  REQUIRE(off > 0);
  put_u32(bytes, off, 0);
  reseal(bytes);
  const auto msg = load_error_message(bytes);
  CHECK(msg.find("class 1 entry 0 sigma[1]") != std::string::npos);
}

TEST_CASE("load_bank prefixes the path and reports missing files") {
  TempDir dir;
  CHECK_THROWS_AS(load_bank(dir.path() / "missing.bank"), IoError);
  const auto p = dir.path() / "bad.bank";
  write_bytes(p, {1, 2, 3});
  try {
    load_bank(p);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("bad.bank") != std::string::npos);
  }
}

TEST_CASE("sample_style is uniform over a class") {
  StyleBank bank(1, {"a"});
  for (int i = 0; i < 4; ++i) bank.add(0, StyleEntry{{{static_cast<double>(i)}, {1}}});
  Rng rng(10);
  std::array<int, 4> hits{};
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) ++hits[static_cast<std::size_t>(sample_style(bank, 0, rng)->mu[0])];
  for (int h : hits) CHECK(std::abs(h / static_cast<double>(kDraws) - 0.25) < 0.02);
}

TEST_CASE("sample_style empty-class fallback and global key") {
  StyleBank bank(1, {"a", "b"});
  bank.add(0, StyleEntry{{{1}, {1}}});
  CHECK_THROWS_AS(sample_style(bank, 1, std::uint64_t{1}), MissingStyleError);
  CHECK_FALSE(sample_style(bank, 1, std::uint64_t{1}, EmptyClassFallback::kSkipMixing).has_value());
  auto global = StyleBank::global(1, "driving");
  global.add(0, StyleEntry{{{3}, {1}}});
  CHECK(sample_style(global, 0, std::uint64_t{1})->mu[0] == 3);
  CHECK(sample_style(global, 0, std::uint64_t{1}) == sample_style(global, 0, std::uint64_t{1}));
}

TEST_CASE("prompt sets shipped with the project load") {
  const auto r1 = load_prompt_set(data_dir() / "prompts" / "r1_random_style.txt");
  CHECK(r1.variant == PromptVariant::kRsp);
  CHECK(r1.cardinality() == 100);
  CHECK_NOTHROW(r1.validate());
  const auto r2 = load_prompt_set(data_dir() / "prompts" / "r2_random_characters.txt");
  CHECK(r2.variant == PromptVariant::kRcp);
  CHECK(r2.cardinality() == 20);
  CHECK(r1.take(5).cardinality() == 5);
  CHECK_THROWS_AS(r1.take(0), ConfigError);
  CHECK_THROWS_AS(r1.take(101), ConfigError);
  CHECK(load_class_names(data_dir() / "classes" / "cityscapes19.txt").size() == 19);
}

TEST_CASE("prompt set files round trip and reject bad input") {
  TempDir dir;
  PromptSet set{"mine", PromptVariant::kRcp, {"abc", "xyz"}};
  save_prompt_set(set, dir.path() / "mine.txt");
  const auto back = load_prompt_set(dir.path() / "mine.txt");
  CHECK(back.entries == set.entries);
  CHECK(back.variant == set.variant);
  CHECK(back.id == "mine");

  write_file(dir.path() / "nohdr.txt", "abc\n");
  CHECK_THROWS_AS(load_prompt_set(dir.path() / "nohdr.txt"), ConfigError);
  write_file(dir.path() / "dup.txt", "# variant: RSP\nabc\nabc\n");
  CHECK_THROWS_AS(load_prompt_set(dir.path() / "dup.txt").validate(), ConfigError);
  CHECK_THROWS_AS(parse_prompt_variant("rsp?"), ConfigError);
}
