#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "famix/core/style_ops.hpp"
#include "famix/error.hpp"

using namespace famix;

namespace {

FeatureMap random_map(std::mt19937_64& rng, int h, int w, int c, double scale = 1.0,
                      double offset = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMap f(h, w, c);
  for (double& v : f.data()) v = offset + scale * n(rng);
  return f;
}

StyleStats random_style(std::mt19937_64& rng, int c) {
  std::uniform_real_distribution<double> mu(-3.0, 3.0);
  std::uniform_real_distribution<double> sd(0.1, 4.0);
  StyleStats s;
  for (int k = 0; k < c; ++k) {
    s.mu.push_back(mu(rng));
    s.sigma.push_back(sd(rng));
  }
  return s;
}

FeatureMap single_channel(int h, int w, std::vector<double> values) {
  return FeatureMap(h, w, 1, std::move(values));
}

// Oracle: plain two-loop mean/population-std of one channel, written independently of
// channel_stats (row/column iteration, at() accessor).
std::pair<double, double> oracle_channel(const FeatureMap& f, int k) {
  double sum = 0.0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) sum += f.at(y, x, k);
  const double mean = sum / (f.height() * f.width());
  double ss = 0.0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) ss += (f.at(y, x, k) - mean) * (f.at(y, x, k) - mean);
  return {mean, std::sqrt(ss / (f.height() * f.width()))};
}

}  // namespace

TEST_CASE("channel_stats matches direct evaluation") {
  const auto f = single_channel(2, 2, {1, 3, 5, 7});
  const auto [om, os] = oracle_channel(f, 0);
  const auto s = channel_stats(f);
  CHECK(s.mu[0] == doctest::Approx(om).epsilon(1e-15));
  CHECK(s.sigma[0] == doctest::Approx(os).epsilon(1e-15));
  CHECK(s.mu[0] == doctest::Approx(4.0));
  CHECK(s.sigma[0] == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("channel_stats clamps zero variance") {
  const auto s = channel_stats(single_channel(2, 2, {2, 2, 2, 2}));
  CHECK(s.mu[0] == 2.0);
  CHECK(s.sigma[0] == kEpsilonSigma);
}

TEST_CASE("channel_stats is shift invariant in sigma") {
  std::mt19937_64 rng(3);
  FeatureMap f(3, 5, 2);
  std::normal_distribution<double> n;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) {
      f.at(y, x, 0) = n(rng);
      f.at(y, x, 1) = f.at(y, x, 0) + 10.0;
    }
  const auto s = channel_stats(f);
  CHECK(s.mu[1] == doctest::Approx(s.mu[0] + 10.0).epsilon(1e-12));
  CHECK(s.sigma[1] == doctest::Approx(s.sigma[0]).epsilon(1e-12));
}

TEST_CASE("channel_stats rejects non-finite input") {
  auto f = single_channel(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(channel_stats(f), InvalidInputError);
  f.at(0, 1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(channel_stats(f), InvalidInputError);
}

TEST_CASE("feature map shape invariants") {
  CHECK_THROWS_AS(FeatureMap(0, 2, 1), ShapeError);
  CHECK_THROWS_AS(FeatureMap(2, 2, 1, std::vector<double>(3)), ShapeError);
}

TEST_CASE("adain of own style is the identity") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_map(rng, 6, 5, 4, 2.0, 1.5);
    const auto out = adain(f, channel_stats(f));
    for (std::size_t i = 0; i < f.data().size(); ++i) {
      REQUIRE(std::abs(out.data()[i] - f.data()[i]) <= 1e-5);
    }
  }
}

TEST_CASE("adain single channel example") {
  const auto f = single_channel(2, 2, {1, 3, 5, 7});
  const auto out = adain(f, StyleStats{{0.0}, {1.0}});
  // Oracle: per-channel evaluation of (x - 4) / sqrt(5)
  const double r5 = std::sqrt(5.0);
  CHECK(out.at(0, 0, 0) == doctest::Approx(-3.0 / r5).epsilon(1e-12));
  CHECK(out.at(0, 1, 0) == doctest::Approx(-1.0 / r5).epsilon(1e-12));
  CHECK(out.at(1, 0, 0) == doctest::Approx(1.0 / r5).epsilon(1e-12));
  CHECK(out.at(1, 1, 0) == doctest::Approx(3.0 / r5).epsilon(1e-12));
}

TEST_CASE("channel_stats of adain output equals the target style (property)") {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> dim(2, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = dim(rng);
    const auto f = random_map(rng, dim(rng), dim(rng), c, 3.0, -1.0);
    const auto target = random_style(rng, c);
    const auto got = channel_stats(adain(f, target));
    for (int k = 0; k < c; ++k) {
      REQUIRE(std::abs(got.mu[k] - target.mu[k]) <= 1e-4 * std::max(1.0, std::abs(target.mu[k])));
      REQUIRE(std::abs(got.sigma[k] - target.sigma[k]) <= 1e-4 * target.sigma[k]);
    }
  }
}

TEST_CASE("adain rejects channel mismatch") {
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(adain(random_map(rng, 2, 2, 3), random_style(rng, 2)), ShapeError);
}

TEST_CASE("adain_affine reproduces adain") {
  std::mt19937_64 rng(23);
  const auto f = random_map(rng, 4, 4, 3, 1.7, 0.3);
  const auto t = random_style(rng, 3);
  const auto a = adain_affine(channel_stats(f), t);
  const auto ref = adain(f, t);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int k = 0; k < 3; ++k)
        CHECK(f.at(y, x, k) * a.scale[k] + a.shift[k] == doctest::Approx(ref.at(y, x, k)).epsilon(1e-12));
}

TEST_CASE("mix_styles endpoints and midpoint") {
  const StyleStats s{{2.0, -1.0}, {1.0, 3.0}};
  const StyleStats t{{6.0, 5.0}, {2.0, 0.5}};
  CHECK(mix_styles(s, t, MixWeight::scalar(0.0)) == s);
  CHECK(mix_styles(s, t, MixWeight::scalar(1.0)) == t);
  const auto mid = mix_styles(s, t, MixWeight::scalar(0.5));
  CHECK(mid.mu[0] == 4.0);
  CHECK(mid.sigma[1] == doctest::Approx(1.75));
  const auto pc = mix_styles(s, t, MixWeight::per_channel({0.0, 1.0}));
  CHECK(pc.mu[0] == 2.0);
  CHECK(pc.mu[1] == 5.0);
}

TEST_CASE("mix_styles with itself is fixed for any alpha") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> a(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_style(rng, 5);
    const auto m = mix_styles(s, s, MixWeight::scalar(a(rng)));
    for (int k = 0; k < 5; ++k) {
      REQUIRE(m.mu[k] == doctest::Approx(s.mu[k]).epsilon(1e-14));
      REQUIRE(m.sigma[k] == doctest::Approx(s.sigma[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("mix_styles is the affine path") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> a(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_style(rng, 3);
    const auto t = random_style(rng, 3);
    const double al = a(rng);
    const auto m = mix_styles(s, t, MixWeight::scalar(al));
    for (int k = 0; k < 3; ++k) {
      REQUIRE(m.mu[k] == doctest::Approx(s.mu[k] + al * (t.mu[k] - s.mu[k])).epsilon(1e-12));
      REQUIRE(m.sigma[k] == doctest::Approx(s.sigma[k] + al * (t.sigma[k] - s.sigma[k])).epsilon(1e-12));
    }
  }
}

TEST_CASE("mix_styles rejects alpha outside [0, 1]") {
  const StyleStats s{{0.0}, {1.0}};
  CHECK_THROWS_AS(mix_styles(s, s, MixWeight::scalar(-0.01)), DomainError);
  CHECK_THROWS_AS(mix_styles(s, s, MixWeight::scalar(1.5)), DomainError);
  CHECK_THROWS_AS(mix_styles(s, s, MixWeight::scalar(std::nan(""))), DomainError);
}

TEST_CASE("sample_mix_weight: support, determinism, symmetry") {
  Rng rng(42);
  constexpr int kDraws = 100000;
  double sum = 0.0;
  int below_half = 0;
  for (int i = 0; i < kDraws; ++i) {
    const double a = sample_mix_weight(MixWeight::Shape::kScalar, 1, rng).values[0];
    REQUIRE(a >= 0.0);
    REQUIRE(a <= 1.0);
    sum += a;
    if (a <= 0.5) ++below_half;
  }
  // Beta(a, a) is symmetric about 1/2.
  CHECK(std::abs(sum / kDraws - 0.5) < 0.01);
  CHECK(std::abs(static_cast<double>(below_half) / kDraws - 0.5) < 0.01);

  const auto w1 = sample_mix_weight(MixWeight::Shape::kPerChannel, 16, std::uint64_t{9});
  const auto w2 = sample_mix_weight(MixWeight::Shape::kPerChannel, 16, std::uint64_t{9});
  CHECK(w1.values == w2.values);
  CHECK(w1.values.size() == 16);
}

TEST_CASE("sample_mix_weight concentrates mass near the endpoints") {
  // Beta(0.1, 0.1): P(X < 0.05) = P(X > 0.95) ~ 0.37 each, so the middle band is rare.
  Rng rng(77);
  int middle = 0;
  for (int i = 0; i < 20000; ++i) {
    const double a = sample_mix_weight(MixWeight::Shape::kScalar, 1, rng).values[0];
    if (a > 0.05 && a < 0.95) ++middle;
  }
  CHECK(middle < 20000 * 0.35);
}

TEST_CASE("partition tiles and reassembles exactly") {
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[i] = i;
  const FeatureMap f(4, 4, 1, v);
  const auto g = partition(f, 4);
  CHECK(g.grid_side() == 2);
  CHECK(g.patch(0, 0).data()[0] == 0);
  CHECK(g.patch(0, 0).data()[3] == 5);
  CHECK(g.patch(1, 1).data()[0] == 10);
  CHECK(assemble(g) == f);
  const auto one = partition(f, 1);
  CHECK(one.patch(0, 0) == f);
}

TEST_CASE("partition is a bijection on random maps (property)") {
  std::mt19937_64 rng(8);
  const int ms[] = {1, 4, 9, 16};
  for (int trial = 0; trial < 40; ++trial) {
    const int m = ms[trial % 4];
    const int s = static_cast<int>(std::sqrt(m));
    const auto f = random_map(rng, s * (1 + trial % 3), s * (2 + trial % 2), 1 + trial % 4);
    const auto g = partition(f, m);
    REQUIRE(g.patch_count() == m);
    REQUIRE(assemble(g) == f);
  }
}

TEST_CASE("partition rejects non-square counts and indivisible maps") {
  FeatureMap f(5, 4, 1);
  CHECK_THROWS_AS(partition(f, 4), PartitionError);
  CHECK_THROWS_AS(partition(FeatureMap(4, 4, 1), 3), PartitionError);
  CHECK_THROWS_AS(partition(FeatureMap(4, 4, 1), 0), PartitionError);
  CHECK_NOTHROW(partition(FeatureMap(6, 4, 1), 4));
}

TEST_CASE("partition_labels follows feature tiling at integer upscale") {
  LabelMap y(8, 8, 3);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) y.at(r, c) = (r / 4) * 2 + (c / 4) > 2 ? 2 : (r / 4) * 2 + (c / 4);
  const auto patches = partition_labels(y, 4, 4, 4);
  REQUIRE(patches.size() == 4);
  CHECK(dominant_class(patches[0]) == 0);
  CHECK(dominant_class(patches[1]) == 1);
  CHECK(dominant_class(patches[2]) == 2);
  CHECK_THROWS_AS(partition_labels(y, 4, 3, 3), ShapeError);
}

TEST_CASE("dominant_class examples") {
  CHECK(dominant_class(LabelMap(2, 2, 3, {1, 1, 2, 0})) == 1);
  CHECK(dominant_class(LabelMap(2, 2, 3, {2, 1, 1, 2})) == 1);
  CHECK_FALSE(dominant_class(LabelMap(2, 2, 3, {255, 255, 255, 255})).has_value());
}

TEST_CASE("dominant_class agrees with a histogram oracle on all 2x2 patches") {
  // Alphabet: classes 0..K-1 plus the ignore label.
  for (int k = 1; k <= 4; ++k) {
    const int symbols = k + 1;
    const int total = symbols * symbols * symbols * symbols;
    for (int code = 0; code < total; ++code) {
      std::vector<std::int32_t> cells(4);
      int c = code;
      for (int i = 0; i < 4; ++i) {
        const int sym = c % symbols;
        c /= symbols;
        cells[i] = sym == k ? 255 : sym;
      }
      std::map<int, int> hist;
      for (auto v : cells)
        if (v != 255) ++hist[v];
      std::optional<int> expected;
      int best = 0;
      for (const auto& [cls, n] : hist) {
        if (n > best) {
          best = n;
          expected = cls;
        }
      }
      REQUIRE(dominant_class(LabelMap(2, 2, k, cells)) == expected);
    }
  }
}

TEST_CASE("snr_noise norm ratio") {
  Rng rng(123);
  std::vector<double> mu = {0.3, -1.2, 2.5, 0.01, 4.0};
  double mu_norm = 0.0;
  for (double v : mu) mu_norm += v * v;
  mu_norm = std::sqrt(mu_norm);
  for (double snr : {0.0, 5.0, 10.0, 20.0, 30.0}) {
    const auto n = snr_noise(mu, snr, rng);
    double nn = 0.0;
    for (double v : n) nn += v * v;
    const double ratio = std::sqrt(nn) / mu_norm;
    CHECK(ratio == doctest::Approx(std::pow(10.0, -snr / 20.0)).epsilon(1e-6));
  }
}

TEST_CASE("perturb_with_snr") {
  const StyleStats s{{1.0, 2.0, -2.0}, {0.5, 1.0, 1.5}};
  SUBCASE("20 dB gives a 0.1 norm ratio on mu and sigma") {
    const auto p = perturb_with_snr(s, 20.0, std::uint64_t{4});
    double dn = 0.0, sn = 0.0, ds = 0.0, ss = 0.0;
    for (int k = 0; k < 3; ++k) {
      dn += (p.mu[k] - s.mu[k]) * (p.mu[k] - s.mu[k]);
      sn += s.mu[k] * s.mu[k];
      ds += (p.sigma[k] - s.sigma[k]) * (p.sigma[k] - s.sigma[k]);
      ss += s.sigma[k] * s.sigma[k];
    }
    CHECK(std::sqrt(dn / sn) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(std::sqrt(ds / ss) == doctest::Approx(0.1).epsilon(1e-6));
  }
  SUBCASE("infinite SNR is the identity") {
    CHECK(perturb_with_snr(s, std::numeric_limits<double>::infinity(), std::uint64_t{1}) == s);
  }
  SUBCASE("0 dB noise has the signal's norm") {
    const auto p = perturb_with_snr(s, 0.0, std::uint64_t{2});
    double dn = 0.0, sn = 0.0;
    for (int k = 0; k < 3; ++k) {
      dn += (p.mu[k] - s.mu[k]) * (p.mu[k] - s.mu[k]);
      sn += s.mu[k] * s.mu[k];
    }
    CHECK(std::sqrt(dn) == doctest::Approx(std::sqrt(sn)).epsilon(1e-9));
  }
  SUBCASE("sigma stays above epsilon") {
    const auto p = perturb_with_snr(s, -20.0, std::uint64_t{3});
    for (double v : p.sigma) CHECK(v >= kEpsilonSigma);
  }
  SUBCASE("zero-norm mu is degenerate") {
    const StyleStats z{{0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(perturb_with_snr(z, 10.0, std::uint64_t{5}), DegenerateSignalError);
  }
  SUBCASE("independent draws for mu and sigma") {
    const StyleStats same{{1.0, 1.0}, {1.0, 1.0}};
    const auto p = perturb_with_snr(same, 10.0, std::uint64_t{6});
    CHECK(p.mu != p.sigma);
  }
}

TEST_CASE("derive_seed separates coordinates") {
  CHECK(derive_seed(1, {0, 1}) != derive_seed(1, {1, 0}));
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}
