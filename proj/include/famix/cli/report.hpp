#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "famix/eval/metrics.hpp"

namespace famix {

/// Rectangular table of preformatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
};

std::string to_tsv(const Table& table);
/// Space-aligned columns with a rule under the header.
std::string to_text(const Table& table);

/// IoU as a percentage with two decimals; "-" for an undefined value.
std::string format_iou(std::optional<double> iou);
std::string format_mean_std(double mean, double std);

/// One row per report: dataset, run, per-class IoU in class order, mIoU. With more than one
/// report a "mean ± std" row follows.
Table eval_table(const std::vector<EvalReport>& reports, const std::vector<std::string>& run_labels);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const RunSummary& summary);
EvalReport eval_report_from_json(const nlohmann::json& j);

struct PlotSeries {
  std::string name;
  /// nullopt leaves a gap (failed arm).
  std::vector<std::optional<double>> values;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;
  std::vector<PlotSeries> series;
};

/// Static SVG with axes, categorical x ticks, one polyline with markers per series and a legend.
std::string render_svg(const LinePlot& plot);

/// Writes text, creating parent directories; throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace famix
