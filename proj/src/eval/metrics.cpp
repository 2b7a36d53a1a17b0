#include "famix/eval/metrics.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "famix/error.hpp"

namespace famix {

ConfusionMatrix::ConfusionMatrix(int num_classes, int ignore_index)
    : num_classes_(num_classes), ignore_index_(ignore_index) {
  if (num_classes < 1) throw ShapeError("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw ShapeError(fmt::format("prediction {}x{} does not match ground truth {}x{}",
                                 pred.height(), pred.width(), gt.height(), gt.width()));
  }
  accumulate(pred.data(), gt.data());
}

void ConfusionMatrix::accumulate(std::span<const std::int32_t> pred,
                                 std::span<const std::int32_t> gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError(fmt::format("prediction has {} pixels, ground truth {}", pred.size(),
                                 gt.size()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i];
    if (g == ignore_index_) continue;
    const int p = pred[i];
    if (g < 0 || g >= num_classes_) {
      throw InvalidInputError(fmt::format("ground-truth label {} at pixel {} out of range", g, i));
    }
    if (p < 0 || p >= num_classes_) {
      throw InvalidInputError(fmt::format("predicted label {} at pixel {} out of range", p, i));
    }
    ++counts_[static_cast<std::size_t>(g) * num_classes_ + p];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ShapeError("confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

IouResult compute_iou(const ConfusionMatrix& cm, ZeroUnionPolicy policy) {
  if (cm.total() == 0) throw UndefinedMetricError("mIoU undefined: no labelled pixels counted");
  const int k = cm.num_classes();
  IouResult r;
  r.per_class.resize(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (int c = 0; c < k; ++c) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int o = 0; o < k; ++o) {
      row += cm.at(c, o);
      col += cm.at(o, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni == 0) {
      if (policy == ZeroUnionPolicy::kCountAsZero) {
        ++r.classes_counted;
      } else if (policy == ZeroUnionPolicy::kCountAsOne) {
        sum += 1.0;
        ++r.classes_counted;
      }
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_class[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++r.classes_counted;
  }
  r.miou = r.classes_counted > 0 ? sum / r.classes_counted : 0.0;
  return r;
}

EvalReport make_report(const ConfusionMatrix& cm, std::string dataset,
                       std::vector<std::string> class_names, ZeroUnionPolicy policy) {
  if (static_cast<int>(class_names.size()) != cm.num_classes()) {
    throw ShapeError(fmt::format("{} class names for a {}-class matrix", class_names.size(),
                                 cm.num_classes()));
  }
  const auto iou = compute_iou(cm, policy);
  return EvalReport{std::move(dataset), std::move(class_names), iou.per_class, iou.miou};
}

std::pair<double, double> mean_and_sample_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

RunSummary multi_run_summary(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidInputError("multi_run_summary needs at least one report");
  RunSummary s;
  s.dataset = reports.front().dataset;
  s.class_names = reports.front().class_names;
  s.runs = reports.size();
  s.single_run = reports.size() == 1;

  std::vector<double> mious;
  for (const auto& r : reports) {
    if (r.per_class_iou.size() != s.class_names.size()) {
      throw ShapeError("reports disagree on the number of classes");
    }
    mious.push_back(r.miou);
  }
  std::tie(s.miou_mean, s.miou_std) = mean_and_sample_std(mious);

  const std::size_t k = s.class_names.size();
  s.per_class_mean.resize(k);
  s.per_class_std.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v;
    for (const auto& r : reports) {
      if (r.per_class_iou[c]) v.push_back(*r.per_class_iou[c]);
    }
    if (v.empty()) continue;
    auto [m, sd] = mean_and_sample_std(v);
    s.per_class_mean[c] = m;
    s.per_class_std[c] = sd;
  }
  return s;
}

}  // namespace famix
