#include "famix/mining/features.hpp"

#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

std::vector<FeatureBatch> extract_feature_batches(JointEncoder& encoder, const std::vector<Sample>& samples,
                                                  int batch_size) {
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  torch::NoGradGuard no_grad;
  std::vector<FeatureBatch> out;
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), i + static_cast<std::size_t>(batch_size));
    std::vector<const RgbImage*> images;
    FeatureBatch batch;
    for (std::size_t j = i; j < end; ++j) {
      images.push_back(&samples[j].image);
      batch.labels.push_back(samples[j].labels);
    }
    auto x = normalize_rgb(images_to_tensor(images)).to(torch::kFloat64);
    batch.features = batch_to_feature_maps(encoder.encode_layer1(x));
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace famix
