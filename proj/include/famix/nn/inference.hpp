#pragma once

#include <string>
#include <vector>

#include "famix/eval/dataset.hpp"
#include "famix/eval/metrics.hpp"
#include "famix/nn/seg_model.hpp"

namespace famix {

/// Arg-max predictions at label resolution, in eval mode without gradients.
std::vector<LabelMap> predict(SegModel& model, const std::vector<const RgbImage*>& images,
                              int label_height, int label_width);

ConfusionMatrix confusion(SegModel& model, const std::vector<Sample>& samples, int batch_size = 8);

EvalReport evaluate(SegModel& model, const std::vector<Sample>& samples,
                    const std::vector<std::string>& class_names, const std::string& dataset,
                    int batch_size = 8);

}  // namespace famix
