#include "famix/core/style_ops.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "famix/error.hpp"

namespace famix {

namespace {

void require_same_channels(int a, int b, const char* what) {
  if (a != b) {
    throw ShapeError(fmt::format("{}: channel mismatch ({} vs {})", what, a, b));
  }
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

StyleStats channel_stats(const FeatureMap& f) {
  if (f.empty()) throw InvalidInputError("channel_stats: empty feature map");
  if (!f.all_finite()) throw InvalidInputError("channel_stats: feature map has non-finite entries");

  const int c = f.channels();
  const std::size_t n = f.pixels();
  const auto data = f.data();
  StyleStats s;
  s.mu.assign(static_cast<std::size_t>(c), 0.0);
  s.sigma.assign(static_cast<std::size_t>(c), 0.0);

  for (std::size_t p = 0; p < n; ++p) {
    for (int k = 0; k < c; ++k) s.mu[k] += data[p * c + k];
  }
  for (int k = 0; k < c; ++k) s.mu[k] /= static_cast<double>(n);

  for (std::size_t p = 0; p < n; ++p) {
    for (int k = 0; k < c; ++k) {
      const double d = data[p * c + k] - s.mu[k];
      s.sigma[k] += d * d;
    }
  }
  for (int k = 0; k < c; ++k) {
    s.sigma[k] = std::max(std::sqrt(s.sigma[k] / static_cast<double>(n)), kEpsilonSigma);
  }
  return s;
}

AffineRestyle adain_affine(const StyleStats& source_style, const StyleStats& target_style) {
  require_same_channels(source_style.channels(), target_style.channels(), "adain");
  const auto c = static_cast<std::size_t>(source_style.channels());
  AffineRestyle a;
  a.scale.resize(c);
  a.shift.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    a.scale[k] = target_style.sigma[k] / source_style.sigma[k];
    a.shift[k] = target_style.mu[k] - a.scale[k] * source_style.mu[k];
  }
  return a;
}

FeatureMap adain(const FeatureMap& source, const StyleStats& target_style) {
  require_same_channels(source.channels(), target_style.channels(), "adain");
  if (target_style.sigma.size() != target_style.mu.size()) {
    throw ShapeError("adain: target style has mismatched mu/sigma lengths");
  }
  const StyleStats src = channel_stats(source);
  const int c = source.channels();
  FeatureMap out = source;
  auto data = out.data();
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    for (int k = 0; k < c; ++k) {
      double& v = data[p * c + k];
      v = target_style.sigma[k] * ((v - src.mu[k]) / src.sigma[k]) + target_style.mu[k];
    }
  }
  return out;
}

StyleStats mix_styles(const StyleStats& source, const StyleStats& target, const MixWeight& alpha) {
  require_same_channels(source.channels(), target.channels(), "mix_styles");
  const int c = source.channels();
  if (alpha.values.empty()) throw DomainError("mix_styles: empty mixing weight");
  if (alpha.shape == MixWeight::Shape::kPerChannel &&
      alpha.values.size() != static_cast<std::size_t>(c)) {
    throw ShapeError(fmt::format("mix_styles: per-channel weight has {} entries for {} channels",
                                 alpha.values.size(), c));
  }
  for (double a : alpha.values) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw DomainError(fmt::format("mix_styles: alpha {} outside [0, 1]", a));
    }
  }
  StyleStats out;
  out.mu.resize(static_cast<std::size_t>(c));
  out.sigma.resize(static_cast<std::size_t>(c));
  for (int k = 0; k < c; ++k) {
    const double a = alpha.at(k);
    out.mu[k] = (1.0 - a) * source.mu[k] + a * target.mu[k];
    out.sigma[k] = (1.0 - a) * source.sigma[k] + a * target.sigma[k];
  }
  return out;
}

MixWeight sample_mix_weight(MixWeight::Shape shape, int channels, Rng& rng) {
  constexpr double kShape = 0.1;
  if (shape == MixWeight::Shape::kScalar) {
    return MixWeight::scalar(sample_beta(rng, kShape, kShape));
  }
  if (channels < 1) throw ShapeError("sample_mix_weight: per-channel weight needs channels >= 1");
  std::vector<double> v(static_cast<std::size_t>(channels));
  for (double& a : v) a = sample_beta(rng, kShape, kShape);
  return MixWeight::per_channel(std::move(v));
}

MixWeight sample_mix_weight(MixWeight::Shape shape, int channels, std::uint64_t seed) {
  Rng rng(seed);
  return sample_mix_weight(shape, channels, rng);
}

int grid_side_for(int m) {
  if (m < 1) throw PartitionError(fmt::format("patch count {} must be positive", m));
  const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
  if (s * s != m) throw PartitionError(fmt::format("patch count {} is not a perfect square", m));
  return s;
}

PatchGrid partition(const FeatureMap& f, int m) {
  const int s = grid_side_for(m);
  if (f.height() % s != 0 || f.width() % s != 0) {
    throw PartitionError(fmt::format("{}x{} map cannot be tiled by a {}x{} grid", f.height(),
                                     f.width(), s, s));
  }
  const int ph = f.height() / s;
  const int pw = f.width() / s;
  const int c = f.channels();
  std::vector<FeatureMap> patches;
  patches.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      FeatureMap p(ph, pw, c);
      for (int y = 0; y < ph; ++y) {
        const double* src = &f.data()[(static_cast<std::size_t>(i * ph + y) * f.width() + j * pw) * c];
        std::copy(src, src + static_cast<std::size_t>(pw) * c,
                  &p.data()[static_cast<std::size_t>(y) * pw * c]);
      }
      patches.push_back(std::move(p));
    }
  }
  return PatchGrid(s, f.height(), f.width(), c, std::move(patches));
}

FeatureMap assemble(const PatchGrid& grid) {
  const int s = grid.grid_side();
  const int ph = grid.patch_height();
  const int pw = grid.patch_width();
  const int c = grid.channels();
  FeatureMap out(grid.parent_height(), grid.parent_width(), c);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      const FeatureMap& p = grid.patch(i, j);
      if (p.height() != ph || p.width() != pw || p.channels() != c) {
        throw ShapeError(fmt::format("patch ({}, {}) has shape {}x{}x{}, expected {}x{}x{}", i, j,
                                     p.height(), p.width(), p.channels(), ph, pw, c));
      }
      for (int y = 0; y < ph; ++y) {
        const double* src = &p.data()[static_cast<std::size_t>(y) * pw * c];
        std::copy(src, src + static_cast<std::size_t>(pw) * c,
                  &out.data()[(static_cast<std::size_t>(i * ph + y) * out.width() + j * pw) * c]);
      }
    }
  }
  return out;
}

std::vector<LabelMap> partition_labels(const LabelMap& labels, int m, int feature_height,
                                       int feature_width) {
  const int s = grid_side_for(m);
  if (feature_height < 1 || feature_width < 1 || labels.height() % feature_height != 0 ||
      labels.width() % feature_width != 0 ||
      labels.height() / feature_height != labels.width() / feature_width) {
    throw ShapeError(fmt::format("{}x{} labels are not an integer upscale of {}x{} features",
                                 labels.height(), labels.width(), feature_height, feature_width));
  }
  if (feature_height % s != 0 || feature_width % s != 0) {
    throw PartitionError(fmt::format("{}x{} map cannot be tiled by a {}x{} grid", feature_height,
                                     feature_width, s, s));
  }
  const int ph = labels.height() / s;
  const int pw = labels.width() / s;
  std::vector<LabelMap> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) out.push_back(labels.crop(i * ph, j * pw, ph, pw));
  }
  return out;
}

std::optional<int> dominant_class(const LabelMap& patch) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(patch.num_classes()), 0);
  bool any = false;
  for (const auto v : patch.data()) {
    if (v == patch.ignore_index() || v < 0 || v >= patch.num_classes()) continue;
    ++counts[static_cast<std::size_t>(v)];
    any = true;
  }
  if (!any) return std::nullopt;
  // max_element returns the first maximum, i.e. the lowest class id on ties.
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<double> snr_noise(std::span<const double> signal, double snr_db, Rng& rng) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw DomainError(fmt::format("SNR {} dB is not usable", snr_db));
  }
  std::vector<double> n(signal.size(), 0.0);
  if (snr_db == std::numeric_limits<double>::infinity()) return n;
  const double signal_norm = l2_norm(signal);
  if (!(signal_norm > 0.0)) {
    throw DegenerateSignalError("cannot scale noise to a zero-norm signal");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  double noise_norm = 0.0;
  while (!(noise_norm > 0.0)) {
    for (double& x : n) x = normal(rng);
    noise_norm = l2_norm(n);
  }
  const double scale = std::pow(10.0, -snr_db / 20.0) * signal_norm / noise_norm;
  for (double& x : n) x *= scale;
  return n;
}

StyleStats perturb_with_snr(const StyleStats& s, double snr_db, Rng& rng) {
  if (s.mu.size() != s.sigma.size()) throw ShapeError("perturb_with_snr: malformed style");
  if (snr_db == std::numeric_limits<double>::infinity()) return s;
  const auto n_mu = snr_noise(s.mu, snr_db, rng);
  const auto n_sigma = snr_noise(s.sigma, snr_db, rng);
  StyleStats out = s;
  for (std::size_t k = 0; k < out.mu.size(); ++k) {
    out.mu[k] += n_mu[k];
    out.sigma[k] = std::max(out.sigma[k] + n_sigma[k], kEpsilonSigma);
  }
  return out;
}

StyleStats perturb_with_snr(const StyleStats& s, double snr_db, std::uint64_t seed) {
  Rng rng(seed);
  return perturb_with_snr(s, snr_db, rng);
}

}  // namespace famix
