#include "famix/nn/inference.hpp"

#include <fmt/format.h>

#include "famix/error.hpp"
#include "famix/nn/tensor_io.hpp"

namespace famix {

std::vector<LabelMap> predict(SegModel& model, const std::vector<const RgbImage*>& images,
                              int label_height, int label_width) {
  torch::NoGradGuard no_grad;
  model->eval();
  auto logits = model->forward(normalize_rgb(images_to_tensor(images)));
  if (logits.size(2) != label_height || logits.size(3) != label_width) {
    namespace F = torch::nn::functional;
    logits = F::interpolate(logits, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{label_height, label_width})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
  }
  auto pred = logits.argmax(1);
  std::vector<LabelMap> out;
  for (int64_t i = 0; i < pred.size(0); ++i) {
    out.push_back(tensor_to_labels(pred[i], model->num_classes(), kDefaultIgnoreIndex));
  }
  return out;
}

ConfusionMatrix confusion(SegModel& model, const std::vector<Sample>& samples, int batch_size) {
  if (samples.empty()) throw InvalidInputError("evaluation set is empty");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  ConfusionMatrix cm(model->num_classes(), samples.front().labels.ignore_index());
  std::size_t i = 0;
  while (i < samples.size()) {
    // Batches of consecutive samples sharing one image and label size.
    const auto& first = samples[i];
    std::vector<const RgbImage*> images;
    std::size_t j = i;
    while (j < samples.size() && images.size() < static_cast<std::size_t>(batch_size) &&
           samples[j].image.height == first.image.height && samples[j].image.width == first.image.width &&
           samples[j].labels.height() == first.labels.height() &&
           samples[j].labels.width() == first.labels.width()) {
      images.push_back(&samples[j].image);
      ++j;
    }
    const auto preds = predict(model, images, first.labels.height(), first.labels.width());
    for (std::size_t k = 0; k < preds.size(); ++k) cm.accumulate(preds[k], samples[i + k].labels);
    i = j;
  }
  return cm;
}

EvalReport evaluate(SegModel& model, const std::vector<Sample>& samples,
                    const std::vector<std::string>& class_names, const std::string& dataset,
                    int batch_size) {
  if (static_cast<int>(class_names.size()) != model->num_classes()) {
    throw ConfigError(fmt::format("{} class names for a {}-class model", class_names.size(), model->num_classes()));
  }
  return make_report(confusion(model, samples, batch_size), dataset, class_names);
}

}  // namespace famix
