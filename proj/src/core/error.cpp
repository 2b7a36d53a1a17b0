#include "famix/error.hpp"

namespace famix {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kPartition: return "partition";
    case ErrorKind::kDegenerateSignal: return "degenerate-signal";
    case ErrorKind::kDegenerateBatch: return "degenerate-batch";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kLoad: return "load";
    case ErrorKind::kMissingStyle: return "missing-style";
    case ErrorKind::kUndefinedMetric: return "undefined-metric";
    case ErrorKind::kDivergence: return "training-divergence";
  }
  return "unknown";
}

}  // namespace famix
