#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "famix/bank/bank_file.hpp"
#include "famix/core/random.hpp"
#include "famix/core/style_ops.hpp"
#include "famix/error.hpp"
#include "famix/eval/synthetic.hpp"
#include "famix/mining/features.hpp"
#include "famix/mining/miner.hpp"
#include "famix/mining/pin.hpp"
#include "famix/nn/tensor_io.hpp"

using namespace famix;

namespace {

FeatureMap random_map(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.5, 2.0), shift(-1.0, 1.0);
  FeatureMap f(h, w, c);
  std::vector<double> a(c), b(c);
  for (int k = 0; k < c; ++k) a[k] = scale(rng), b[k] = shift(rng);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) f.at(y, x, k) = b[k] + a[k] * n(rng);
    }
  }
  return f;
}

PromptSet toy_prompts(std::size_t n) {
  PromptSet p;
  p.id = "toy";
  p.variant = PromptVariant::kRsp;
  for (std::size_t i = 0; i < n; ++i) p.entries.push_back("fragment " + std::to_string(i));
  return p;
}

// Label map of 2x2 uniform blocks (each 4x4 pixels): class ids or 255.
LabelMap block_labels(const std::array<int, 4>& blocks, int classes) {
  LabelMap l(8, 8, classes);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) l.at(y, x) = blocks[static_cast<std::size_t>((y / 4) * 2 + x / 4)];
  }
  return l;
}

std::vector<FeatureBatch> scripted_stream(int channels, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> cls(-1, classes - 1), count(1, 3);
  std::vector<FeatureBatch> batches;
  for (int b = 0; b < 6; ++b) {
    FeatureBatch fb;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      std::array<int, 4> blocks{};
      for (auto& v : blocks) {
        const int c = cls(rng);
        v = c < 0 ? 255 : c;
      }
      fb.features.push_back(random_map(8, 8, channels, derive_seed(seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(i)})));
      fb.labels.push_back(block_labels(blocks, classes));
    }
    batches.push_back(std::move(fb));
  }
  return batches;
}

}  // namespace

TEST_CASE("PIN analytic gradient matches central differences (stub encoder)") {
  StubEncoder enc(16, 24, 3);
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    const auto patch = random_map(8, 8, 16, 100 + trial);
    PinObjective obj(enc, patch, enc.embed_text("misty harbour style road " + std::to_string(trial)));
    auto style = obj.initial_style();
    Rng rng(trial);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    for (auto& m : style.mu) m += jitter(rng);
    for (auto& s : style.sigma) s *= 1.0 + jitter(rng);
    const auto [loss, grad] = obj.loss_and_gradient(style);
    CHECK(loss == doctest::Approx(obj.loss(style)).epsilon(1e-12));

    const double h = 1e-6;
    double diff2 = 0.0, ref2 = 0.0;
    auto probe = [&](std::vector<double>& v, std::size_t k, double analytic) {
      const double keep = v[k];
      v[k] = keep + h;
      const double up = obj.loss(style);
      v[k] = keep - h;
      const double down = obj.loss(style);
      v[k] = keep;
      const double fd = (up - down) / (2 * h);
      diff2 += (analytic - fd) * (analytic - fd);
      ref2 += fd * fd;
    };
    for (std::size_t k = 0; k < 16; ++k) probe(style.mu, k, grad.mu[k]);
    for (std::size_t k = 0; k < 16; ++k) probe(style.sigma, k, grad.sigma[k]);
    REQUIRE(ref2 > 0.0);
    CHECK(std::sqrt(diff2 / ref2) < 1e-3);
  }
}

TEST_CASE("PIN loss trace never increases and the distance does not grow") {
  StubEncoder enc(8, 16, 5);
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const auto patch = random_map(4, 4, 8, 200 + trial);
    const auto r = pin_optimize(patch, make_prompt("neon dusk", "sky"), enc, {30, 1.0, true});
    REQUIRE(r.loss_trace.size() == static_cast<std::size_t>(r.iterations_run) + 1);
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) CHECK(r.loss_trace[i] <= r.loss_trace[i - 1]);
    CHECK(r.final_cosine_distance <= r.initial_cosine_distance);
    CHECK(r.initial_cosine_distance == doctest::Approx(r.loss_trace.front()));
    for (double s : r.style.sigma) CHECK(s >= kEpsilonSigma);
  }
}

TEST_CASE("PIN with zero steps returns the patch's own style; negative steps are rejected") {
  StubEncoder enc(8, 16, 5);
  const auto patch = random_map(4, 4, 8, 9);
  const auto r = pin_optimize(patch, make_prompt("a", "b"), enc, {0, 1.0, true});
  const auto own = channel_stats(patch);
  for (int k = 0; k < 8; ++k) {
    CHECK(r.style.mu[k] == doctest::Approx(own.mu[k]).epsilon(1e-12));
    CHECK(r.style.sigma[k] == doctest::Approx(own.sigma[k]).epsilon(1e-12));
  }
  CHECK(r.final_cosine_distance == r.initial_cosine_distance);
  CHECK_THROWS_AS(pin_optimize(patch, make_prompt("a", "b"), enc, {-1, 1.0, true}), DomainError);
}

TEST_CASE("pin_apply restylizes to the optimized statistics") {
  StubEncoder enc(8, 16, 5);
  const auto patch = random_map(4, 4, 8, 11);
  const auto r = pin_optimize(patch, make_prompt("pastel fog", "road"), enc, {10, 1.0, true});
  const auto got = channel_stats(pin_apply(patch, r.style));
  for (int k = 0; k < 8; ++k) {
    CHECK(got.mu[k] == doctest::Approx(r.style.mu[k]).epsilon(1e-9));
    CHECK(got.sigma[k] == doctest::Approx(r.style.sigma[k]).epsilon(1e-6));
  }
}

TEST_CASE("prompt construction variants") {
  CHECK(make_prompt("Ethereal Mist", "road").rendered == "Ethereal Mist style road");
  CHECK(make_prompt("Ethereal Mist", "road", PromptConstruction::kStyleOnly).rendered == "Ethereal Mist style");
  CHECK(make_prompt("Ethereal Mist", "road", PromptConstruction::kClassOnly).rendered == "road");
  for (auto c : {PromptConstruction::kStyleAndClass, PromptConstruction::kStyleOnly, PromptConstruction::kClassOnly}) {
    CHECK(parse_prompt_construction(to_string(c)) == c);
  }
  CHECK_THROWS_AS(parse_prompt_construction("everything"), ConfigError);
}

TEST_CASE("encoder weights are deterministic per seed and untouched by mining") {
  auto a = make_encoder("tiny-clip", 0);
  auto b = make_encoder("tiny-clip", 0);
  auto c = make_encoder("tiny-clip", 1);
  const auto before = encoder_checksum(*a);
  CHECK(before == encoder_checksum(*b));
  CHECK(before != encoder_checksum(*c));
  const auto corpus = make_synthetic_corpus({64, 8, 2, 6, 7});
  const auto batches = extract_feature_batches(*a, corpus.train, 4);
  MiningOptions mo;
  mo.pin.steps = 3;
  mine_style_banks(batches, toy_prompts(3), synthetic_class_names(), *a, mo);
  CHECK(encoder_checksum(*a) == before);
  CHECK_THROWS_AS(make_encoder("vit-huge", 0), ConfigError);
}

TEST_CASE("text embeddings are deterministic and prompt-dependent") {
  auto enc = make_encoder("tiny-clip", 0);
  const auto a = enc->embed_text("Ethereal Mist style road");
  CHECK(torch::equal(a, enc->embed_text("Ethereal Mist style road")));
  CHECK_FALSE(torch::equal(a, enc->embed_text("Ethereal Mist style sky")));
  CHECK(a.size(0) == enc->embed_dim());
}

TEST_CASE("feature extraction keeps batch order, sizes and labels") {
  auto enc = make_encoder("tiny-clip", 0);
  const auto corpus = make_synthetic_corpus({64, 10, 2, 6, 7});
  const auto batches = extract_feature_batches(*enc, corpus.train, 4);
  REQUIRE(batches.size() == 3);
  CHECK(batches[2].features.size() == 2);
  CHECK(batches[0].features[0].channels() == enc->layer1_channels());
  CHECK(batches[0].features[0].height() == 16);
  CHECK(batches[1].labels[1] == corpus.train[5].labels);
}

TEST_CASE("bank growth per batch equals the distinct dominant classes of that batch") {
  const int classes = 4;
  StubEncoder enc(6, 12, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto stream = scripted_stream(6, classes, seed);
    MiningOptions mo;
    mo.m = 4;
    mo.pin.steps = 2;
    mo.seed = seed;
    StyleMiner miner(enc, toy_prompts(5), {"a", "b", "c", "d"}, mo);
    std::size_t total = 0;
    for (std::size_t b = 0; b < stream.size(); ++b) {
      std::set<int> distinct;
      for (const auto& l : stream[b].labels) {
        for (int i = 0; i < 8; i += 4) {
          for (int j = 0; j < 8; j += 4) {
            if (l.at(i, j) != 255) distinct.insert(l.at(i, j));
          }
        }
      }
      const auto added = miner.mine_batch(stream[b], b);
      CHECK(added == distinct.size());
      total += added;
      CHECK(miner.bank().total_entries() == total);
    }
    for (const auto& rec : miner.records()) {
      CHECK(rec.pin.iterations_run <= 2);
      CHECK((rec.patch_id >> 32) == rec.batch);
    }
  }
}

TEST_CASE("balanced selection picks the first patch of each dominant class") {
  std::vector<LabelMap> patches;
  for (int c : {2, 255, 1, 2, 1, 0}) patches.emplace_back(2, 2, 3, std::vector<std::int32_t>(4, c));
  const auto sel = select_balanced_patches(patches);
  REQUIRE(sel.size() == 3);
  CHECK(sel.at(0) == 5);
  CHECK(sel.at(1) == 2);
  CHECK(sel.at(2) == 0);
}

TEST_CASE("mining is independent of the worker count and byte-identical across reruns") {
  StubEncoder enc(6, 12, 2);
  const auto stream = scripted_stream(6, 4, 17);
  MiningOptions mo;
  mo.m = 4;
  mo.pin.steps = 5;
  mo.seed = 17;
  const std::vector<std::string> names = {"a", "b", "c", "d"};
  const auto one = mine_style_banks(stream, toy_prompts(4), names, enc, mo);
  mo.workers = 3;
  const auto three = mine_style_banks(stream, toy_prompts(4), names, enc, mo);
  CHECK(one == three);
  CHECK(encode_bank(one) == encode_bank(three));
  mo.workers = 1;
  CHECK(encode_bank(mine_style_banks(stream, toy_prompts(4), names, enc, mo)) == encode_bank(one));
  mo.seed = 18;
  CHECK(encode_bank(mine_style_banks(stream, toy_prompts(4), names, enc, mo)) != encode_bank(one));
}

TEST_CASE("global mining keeps one style per feature map under a single key") {
  StubEncoder enc(6, 12, 2);
  const auto stream = scripted_stream(6, 4, 3);
  MiningOptions mo;
  mo.m = 4;
  mo.pin.steps = 2;
  const auto bank = mine_global(stream, toy_prompts(3), enc, mo);
  std::size_t maps = 0;
  for (const auto& b : stream) maps += b.features.size();
  CHECK(bank.is_global());
  CHECK(bank.num_classes() == 1);
  CHECK(bank.total_entries() == maps);
  for (const auto& e : bank.entries(0)) CHECK(e.prompt.find(std::string("style ") + kGlobalStyleKey) != std::string::npos);
}

TEST_CASE("noise bank follows the balanced selection and records its SNR") {
  const auto stream = scripted_stream(6, 4, 21);
  const std::vector<std::string> names = {"a", "b", "c", "d"};
  StubEncoder enc(6, 12, 2);
  MiningOptions mo;
  mo.m = 4;
  mo.pin.steps = 0;
  const auto prompt_bank = mine_style_banks(stream, toy_prompts(2), names, enc, mo);
  const auto noise = mine_noise_bank(stream, names, 4, 10.0, 5);
  CHECK(noise.metadata().source == StyleSource::kNoise);
  CHECK(noise.metadata().snr_db == 10.0);
  for (int k = 0; k < 4; ++k) {
    REQUIRE(noise.size(k) == prompt_bank.size(k));
    for (std::size_t i = 0; i < noise.size(k); ++i) {
      CHECK(noise.entries(k)[i].source_patch_id == prompt_bank.entries(k)[i].source_patch_id);
      CHECK(noise.entries(k)[i].style != prompt_bank.entries(k)[i].style);
    }
  }
  CHECK(encode_bank(mine_noise_bank(stream, names, 4, 10.0, 5)) == encode_bank(noise));
  // Infinite SNR leaves the source style (rounded to float) in place.
  const auto clean = mine_noise_bank(stream, names, 4, std::numeric_limits<double>::infinity(), 5);
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < clean.size(k); ++i) CHECK(clean.entries(k)[i].style == prompt_bank.entries(k)[i].style);
  }
}

TEST_CASE("miner rejects mismatched inputs") {
  StubEncoder enc(6, 12, 2);
  MiningOptions mo;
  mo.m = 4;
  StyleMiner miner(enc, toy_prompts(2), {"a", "b"}, mo);
  FeatureBatch bad;
  bad.features.push_back(random_map(8, 8, 5, 1));
  bad.labels.push_back(block_labels({0, 1, 0, 1}, 2));
  CHECK_THROWS_AS(miner.mine_batch(bad, 0), ShapeError);
  FeatureBatch uneven;
  uneven.features.push_back(random_map(8, 8, 6, 1));
  CHECK_THROWS_AS(miner.mine_batch(uneven, 0), ShapeError);
}
