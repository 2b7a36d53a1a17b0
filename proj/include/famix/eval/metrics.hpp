#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "famix/core/types.hpp"

namespace famix {

/// K x K pixel counts, rows = ground truth, columns = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes, int ignore_index = kDefaultIgnoreIndex);

  int num_classes() const noexcept { return num_classes_; }
  int ignore_index() const noexcept { return ignore_index_; }

  std::uint64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
  }
  std::uint64_t total() const noexcept;

  /// Adds one image. Pixels whose ground truth is the ignore index are skipped.
  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void accumulate(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int num_classes_;
  int ignore_index_;
  std::vector<std::uint64_t> counts_;
};

/// How classes with TP + FP + FN = 0 enter the mean.
enum class ZeroUnionPolicy { kExclude, kCountAsZero, kCountAsOne };

struct IouResult {
  /// nullopt for classes with zero union.
  std::vector<std::optional<double>> per_class;
  double miou = 0.0;
  int classes_counted = 0;
};

/// IoU_k = TP / (TP + FP + FN); throws UndefinedMetricError on an empty matrix.
IouResult compute_iou(const ConfusionMatrix& cm, ZeroUnionPolicy policy = ZeroUnionPolicy::kExclude);

struct EvalReport {
  std::string dataset;
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
};

EvalReport make_report(const ConfusionMatrix& cm, std::string dataset,
                       std::vector<std::string> class_names,
                       ZeroUnionPolicy policy = ZeroUnionPolicy::kExclude);

/// Mean and sample standard deviation (n - 1) across runs.
struct RunSummary {
  std::string dataset;
  std::vector<std::string> class_names;
  std::size_t runs = 0;
  bool single_run = false;
  double miou_mean = 0.0;
  double miou_std = 0.0;
  std::vector<std::optional<double>> per_class_mean;
  std::vector<std::optional<double>> per_class_std;
};

RunSummary multi_run_summary(const std::vector<EvalReport>& reports);

/// Mean and sample std of plain values; std = 0 for a single value.
std::pair<double, double> mean_and_sample_std(const std::vector<double>& values);

}  // namespace famix
