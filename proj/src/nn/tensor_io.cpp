#include "famix/nn/tensor_io.hpp"

#include <fmt/format.h>

#include "famix/error.hpp"

namespace famix {

torch::Tensor normalize_rgb(const torch::Tensor& rgb01) {
  static const auto mean = torch::tensor({0.48145466, 0.4578275, 0.40821073}).view({1, 3, 1, 1});
  static const auto stdev = torch::tensor({0.26862954, 0.26130258, 0.27577711}).view({1, 3, 1, 1});
  return (rgb01 - mean.to(rgb01.dtype())) / stdev.to(rgb01.dtype());
}

torch::Tensor images_to_tensor(const std::vector<const RgbImage*>& images) {
  if (images.empty()) throw InvalidInputError("no images to batch");
  const int h = images.front()->height;
  const int w = images.front()->width;
  auto out = torch::empty({static_cast<long>(images.size()), 3, h, w}, torch::kFloat32);
  auto acc = out.accessor<float, 4>();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = *images[n];
    if (img.height != h || img.width != w) {
      throw ShapeError(fmt::format("image {} is {}x{}, batch is {}x{}", n, img.height, img.width, h, w));
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) acc[n][c][y][x] = img.at(y, x, c) / 255.0f;
  }
  return out;
}

torch::Tensor labels_to_tensor(const std::vector<const LabelMap*>& labels) {
  if (labels.empty()) throw InvalidInputError("no label maps to batch");
  const int h = labels.front()->height();
  const int w = labels.front()->width();
  auto out = torch::empty({static_cast<long>(labels.size()), h, w}, torch::kInt64);
  auto acc = out.accessor<std::int64_t, 3>();
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto& y = *labels[n];
    if (y.height() != h || y.width() != w) throw ShapeError("label maps in a batch differ in size");
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) acc[n][r][c] = y.at(r, c);
  }
  return out;
}

LabelMap tensor_to_labels(const torch::Tensor& hw, int num_classes, int ignore_index) {
  auto t = hw.to(torch::kInt32).contiguous();
  const int h = static_cast<int>(t.size(0));
  const int w = static_cast<int>(t.size(1));
  std::vector<std::int32_t> data(t.data_ptr<std::int32_t>(), t.data_ptr<std::int32_t>() + t.numel());
  return LabelMap(h, w, num_classes, std::move(data), ignore_index);
}

FeatureMap tensor_to_feature_map(const torch::Tensor& chw) {
  if (chw.dim() != 3) throw ShapeError("expected a C x H x W tensor");
  auto t = chw.detach().to(torch::kFloat64).contiguous();
  return FeatureMap::from_chw(std::span<const double>(t.data_ptr<double>(), t.numel()),
                              static_cast<int>(t.size(1)), static_cast<int>(t.size(2)),
                              static_cast<int>(t.size(0)));
}

torch::Tensor feature_map_to_tensor(const FeatureMap& f, torch::ScalarType dtype) {
  auto t = torch::empty({f.channels(), f.height(), f.width()}, torch::kFloat64);
  auto acc = t.accessor<double, 3>();
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      for (int k = 0; k < f.channels(); ++k) acc[k][y][x] = f.at(y, x, k);
  return t.to(dtype);
}

std::vector<FeatureMap> batch_to_feature_maps(const torch::Tensor& nchw) {
  std::vector<FeatureMap> maps;
  for (int64_t n = 0; n < nchw.size(0); ++n) maps.push_back(tensor_to_feature_map(nchw[n]));
  return maps;
}

torch::Tensor feature_maps_to_batch(const std::vector<FeatureMap>& maps, torch::ScalarType dtype) {
  std::vector<torch::Tensor> parts;
  for (const auto& f : maps) parts.push_back(feature_map_to_tensor(f, dtype));
  return torch::stack(parts);
}

StyleStats tensor_to_style(const torch::Tensor& mu, const torch::Tensor& sigma) {
  auto m = mu.detach().to(torch::kFloat64).contiguous();
  auto s = sigma.detach().to(torch::kFloat64).contiguous();
  StyleStats out;
  out.mu.assign(m.data_ptr<double>(), m.data_ptr<double>() + m.numel());
  out.sigma.assign(s.data_ptr<double>(), s.data_ptr<double>() + s.numel());
  return out;
}

std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tensors) {
    auto c = t.detach().cpu().contiguous();
    const auto* p = static_cast<const std::uint8_t*>(c.data_ptr());
    const std::size_t n = static_cast<std::size_t>(c.numel()) * c.element_size();
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace famix
