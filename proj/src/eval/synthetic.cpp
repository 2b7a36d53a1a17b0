#include "famix/eval/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numbers>
#include <random>

#include "famix/core/random.hpp"
#include "famix/error.hpp"

namespace famix {

namespace {

struct ClassLook {
  std::array<double, 3> bg;
  std::array<double, 3> fg;
};

// Source-domain palette: colour is a (spurious) cue for the class.
constexpr std::array<ClassLook, 4> kPalette = {{
    {{105, 105, 105}, {155, 155, 150}},  // road
    {{150, 60, 50}, {205, 115, 95}},     // building
    {{40, 125, 40}, {95, 185, 75}},      // vegetation
    {{95, 140, 215}, {135, 175, 245}},   // sky
}};

// Texture period in pixels; kept well above the stride of the Layer1 features so the
// pattern survives downsampling.
constexpr double kPeriod = 12.0;

double texture(int cls, int x, int y, double phase) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  switch (cls) {
    case 0: return 0.5 + 0.5 * std::sin(kTwoPi * y / kPeriod + phase);  // horizontal stripes
    case 1: return 0.5 + 0.5 * std::sin(kTwoPi * x / kPeriod + phase);  // vertical stripes
    case 2:
      return 0.5 + 0.5 * std::sin(kTwoPi * x / kPeriod + phase) * std::sin(kTwoPi * y / kPeriod);  // dots
    default: return 0.5 + 0.15 * std::sin(kTwoPi * (x + y) / 48.0 + phase);  // near flat
  }
}

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Sample make_synthetic_scene(int image_size, int regions, std::uint64_t seed) {
  if (image_size < 8 || regions < 1) throw InvalidInputError("synthetic scene too small");
  Rng rng(seed);
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(image_size));
  std::uniform_int_distribution<int> cls_pick(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 12.0);
  std::normal_distribution<double> pixel_noise(0.0, 6.0);

  struct Site {
    double x, y;
    int cls;
    double phase;
    std::array<double, 3> bg, fg;
  };
  std::vector<Site> sites;
  for (int r = 0; r < regions; ++r) {
    Site s{pos(rng), pos(rng), cls_pick(rng), unit(rng) * 6.28, {}, {}};
    for (int c = 0; c < 3; ++c) {
      const double j = jitter(rng);
      s.bg[c] = kPalette[s.cls].bg[c] + j;
      s.fg[c] = kPalette[s.cls].fg[c] + j;
    }
    sites.push_back(s);
  }

  Sample out{RgbImage{image_size, image_size,
                      std::vector<std::uint8_t>(static_cast<std::size_t>(image_size) * image_size * 3)},
             LabelMap(image_size, image_size, 4)};
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t i = 0; i < sites.size(); ++i) {
        const double dx = sites[i].x - x, dy = sites[i].y - y;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      const Site& s = sites[best];
      out.labels.at(y, x) = s.cls;
      const double t = texture(s.cls, x, y, s.phase);
      for (int c = 0; c < 3; ++c) {
        out.image.at(y, x, c) = clamp_byte(s.bg[c] + t * (s.fg[c] - s.bg[c]) + pixel_noise(rng));
      }
    }
  }
  return out;
}

RgbImage shift_domain(const RgbImage& image, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> rot(1, 2);
  std::uniform_real_distribution<double> blend(0.25, 0.5);
  std::uniform_real_distribution<double> gain(0.6, 1.0);
  std::uniform_real_distribution<double> cast(-40.0, 40.0);
  std::uniform_real_distribution<double> contrast(0.5, 0.8);
  const int shift = rot(rng);
  const double w = blend(rng);
  const double k = contrast(rng);
  std::array<double, 3> g{}, o{};
  for (int c = 0; c < 3; ++c) {
    g[c] = gain(rng);
    o[c] = cast(rng);
  }

  // Partial recolouring towards a rotated channel order, then a per-channel colour cast and
  // a contrast reduction around mid-grey.
  RgbImage out = image;
  for (std::size_t p = 0; p < image.data.size() / 3; ++p) {
    for (int c = 0; c < 3; ++c) {
      const double mixed = (1.0 - w) * image.data[p * 3 + c] + w * image.data[p * 3 + (c + shift) % 3];
      out.data[p * 3 + c] = clamp_byte(128.0 + k * g[c] * (mixed - 128.0) + o[c]);
    }
  }
  return out;
}

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusOptions& o) {
  SyntheticCorpus corpus;
  for (int i = 0; i < o.train_images; ++i) {
    corpus.train.push_back(
        make_synthetic_scene(o.image_size, o.regions, derive_seed(o.seed, {0, static_cast<std::uint64_t>(i)})));
  }
  for (int i = 0; i < o.val_images; ++i) {
    Sample s = make_synthetic_scene(o.image_size, o.regions,
                                    derive_seed(o.seed, {1, static_cast<std::uint64_t>(i)}));
    Sample shifted{shift_domain(s.image, derive_seed(o.seed, {2, static_cast<std::uint64_t>(i)})),
                   s.labels};
    corpus.val_source.push_back(std::move(s));
    corpus.val_shifted.push_back(std::move(shifted));
  }
  return corpus;
}

std::filesystem::path write_synthetic_corpus(const SyntheticCorpusOptions& options,
                                             const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  const auto corpus = make_synthetic_corpus(options);
  std::vector<ManifestEntry> entries;
  auto emit = [&](const std::vector<Sample>& samples, const std::string& split) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto stem = fmt::format("{}_{:04d}", split, i);
      ManifestEntry e{dir / "images" / (stem + ".ppm"), dir / "labels" / (stem + ".pgm"), split};
      write_ppm(samples[i].image, e.image);
      write_label_pgm(samples[i].labels, e.label);
      entries.push_back(std::move(e));
    }
  };
  emit(corpus.train, "train");
  emit(corpus.val_source, "val_source");
  emit(corpus.val_shifted, "val_shifted");
  const auto manifest = dir / "manifest.txt";
  save_manifest(entries, manifest);
  std::ofstream names(dir / "classes.txt", std::ios::trunc);
  for (const auto& n : synthetic_class_names()) names << n << '\n';
  return manifest;
}

}  // namespace famix
