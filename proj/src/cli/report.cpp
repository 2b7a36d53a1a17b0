#include "famix/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <sstream>

#include "famix/error.hpp"

namespace famix {

namespace fs = std::filesystem;
using nlohmann::json;

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw InvalidInputError(fmt::format("table row has {} cells, header has {}", row.size(), header.size()));
  }
  rows.push_back(std::move(row));
}

std::string to_tsv(const Table& table) {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "\t" : "") + cells[i];
    return s + "\n";
  };
  std::string out = line(table.header);
  for (const auto& r : table.rows) out += line(r);
  return out;
}

namespace {

// Display width in code points, so "±" and "✓" align.
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string to_text(const Table& table) {
  std::vector<std::size_t> width(table.header.size(), 0);
  auto grow = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) width[i] = std::max(width[i], display_width(cells[i]));
  };
  grow(table.header);
  for (const auto& r : table.rows) grow(r);
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += "  ";
      s += cells[i];
      if (i + 1 < cells.size()) s += std::string(width[i] - display_width(cells[i]), ' ');
    }
    return s + "\n";
  };
  std::string out = line(table.header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
  for (const auto& r : table.rows) out += line(r);
  return out;
}

std::string format_iou(std::optional<double> iou) {
  return iou ? fmt::format("{:.2f}", 100.0 * *iou) : "-";
}

std::string format_mean_std(double mean, double std) {
  return fmt::format("{:.2f} ± {:.2f}", 100.0 * mean, 100.0 * std);
}

Table eval_table(const std::vector<EvalReport>& reports, const std::vector<std::string>& run_labels) {
  if (reports.empty()) throw InvalidInputError("eval table needs at least one report");
  if (run_labels.size() != reports.size()) throw InvalidInputError("eval table: one run label per report");
  Table t;
  t.header = {"dataset", "run"};
  for (const auto& n : reports.front().class_names) t.header.push_back(n);
  t.header.push_back("mIoU");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::vector<std::string> row = {r.dataset, run_labels[i]};
    for (const auto& v : r.per_class_iou) row.push_back(format_iou(v));
    row.push_back(format_iou(r.miou));
    t.add_row(std::move(row));
  }
  if (reports.size() > 1) {
    const auto s = multi_run_summary(reports);
    std::vector<std::string> row = {s.dataset, "mean ± std"};
    for (std::size_t k = 0; k < s.per_class_mean.size(); ++k) {
      row.push_back(s.per_class_mean[k] ? format_mean_std(*s.per_class_mean[k], s.per_class_std[k].value_or(0.0)) : "-");
    }
    row.push_back(format_mean_std(s.miou_mean, s.miou_std));
    t.add_row(std::move(row));
  }
  return t;
}

namespace {

json optional_array(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
  return a;
}

}  // namespace

json to_json(const EvalReport& r) {
  return {{"dataset", r.dataset}, {"classes", r.class_names}, {"per_class_iou", optional_array(r.per_class_iou)},
          {"miou", r.miou}};
}

json to_json(const RunSummary& s) {
  return {{"dataset", s.dataset},
          {"classes", s.class_names},
          {"runs", s.runs},
          {"single_run", s.single_run},
          {"miou_mean", s.miou_mean},
          {"miou_std", s.miou_std},
          {"per_class_mean", optional_array(s.per_class_mean)},
          {"per_class_std", optional_array(s.per_class_std)}};
}

EvalReport eval_report_from_json(const json& j) {
  try {
    EvalReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    for (const auto& v : j.at("per_class_iou")) {
      r.per_class_iou.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
    r.miou = j.at("miou").get<double>();
    if (r.per_class_iou.size() != r.class_names.size()) throw LoadError("per_class_iou and classes differ in length");
    return r;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("eval report: {}", e.what()));
  }
}

std::string render_svg(const LinePlot& plot) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 170, kTop = 40, kBottom = 60;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : plot.series) {
    for (const auto& v : s.values) {
      if (v && std::isfinite(*v)) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  const std::size_t n = plot.x_ticks.size();
  auto x_at = [&](std::size_t i) { return kLeft + (n <= 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1)); };
  auto y_at = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kW, kH, kW, kH);
  s += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kW, kH);
  s += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", kLeft + pw / 2,
                   xml_escape(plot.title));
  s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", kLeft, kTop,
                   kTop + ph);
  s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", kLeft,
                   kTop + ph, kLeft + pw);
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const double y = y_at(v);
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#ddd\"/>\n", kLeft, y,
                     kLeft + pw);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", kLeft - 6, y + 4, v);
  }
  for (std::size_t i = 0; i < n; ++i) {
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", x_at(i), kTop + ph + 18,
                     xml_escape(plot.x_ticks[i]));
  }
  s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kH - 14,
                   xml_escape(plot.x_label));
  s += fmt::format("<text transform=\"translate(18 {:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                   kTop + ph / 2, xml_escape(plot.y_label));

  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const auto& series = plot.series[si];
    const char* color = kColors[si % std::size(kColors)];
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, points);
      }
      points.clear();
    };
    for (std::size_t i = 0; i < series.values.size() && i < n; ++i) {
      const auto& v = series.values[i];
      if (!v || !std::isfinite(*v)) {
        flush();
        continue;
      }
      points += fmt::format("{}{:.1f},{:.1f}", points.empty() ? "" : " ", x_at(i), y_at(*v));
      s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3.5\" fill=\"{}\"/>\n", x_at(i), y_at(*v), color);
    }
    flush();
    const double ly = kTop + 10 + 20.0 * static_cast<double>(si);
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                     kLeft + pw + 15, ly, kLeft + pw + 35, color);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", kLeft + pw + 40, ly + 4, xml_escape(series.name));
  }
  s += "</svg>\n";
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed: {}", path.string()));
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace famix
