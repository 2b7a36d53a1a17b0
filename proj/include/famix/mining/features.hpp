#pragma once

#include <vector>

#include "famix/eval/dataset.hpp"
#include "famix/mining/encoder.hpp"
#include "famix/mining/miner.hpp"

namespace famix {

/// Layer1 features of consecutive batches of source samples (one pass, dataset order).
std::vector<FeatureBatch> extract_feature_batches(JointEncoder& encoder, const std::vector<Sample>& samples,
                                                  int batch_size);

}  // namespace famix
