#include "table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include "quasihom/error.hpp"

namespace quasihom::cli {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

std::string escape(const std::string& s) {
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

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;
constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Axis {
  bool log = false;
  double lo = 0.0;
  double hi = 1.0;

  double transform(double v) const { return log ? std::log10(v) : v; }

  void fit(double min, double max) {
    lo = transform(min);
    hi = transform(max);
    if (log) {
      lo = std::floor(lo);
      hi = std::ceil(hi);
    }
    if (hi - lo <= 0.0) {
      const double pad = log ? 1.0 : std::max(1.0, std::abs(lo)) * 0.5;
      lo -= pad;
      hi += pad;
    } else if (!log) {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }

  /// Tick positions in data units.
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 8.0)));
      for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); e += step) out.push_back(std::pow(10.0, e));
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
  }

  std::string label(double v) const {
    if (log) return fmt::format("1e{}", static_cast<int>(std::lround(std::log10(v))));
    return fmt::format("{:g}", v);
  }
};

}  // namespace

void ResultTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) {
    fail(ErrorCode::kInvalidArgument, fmt::format("row has {} values for {} columns", row.size(), columns.size()));
  }
  rows.push_back(std::move(row));
}

int ResultTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

std::string to_csv(const ResultTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += fmt::format("{:.17g}", row[c]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const ResultTable& table, const std::filesystem::path& path) {
  write_text(path, to_csv(table));
  if (!table.metadata.empty()) {
    std::string meta;
    for (const auto& [key, value] : table.metadata) meta += key + '=' + value + '\n';
    std::filesystem::path meta_path = path;
    meta_path += ".meta";
    write_text(meta_path, meta);
  }
}

std::string render_svg(const ResultTable& table, const PlotSpec& spec) {
  const auto invalid = [](const std::string& what) { fail(ErrorCode::kInvalidSelection, what); };
  if (table.rows.empty()) invalid("no rows to plot");
  if (spec.y.empty()) invalid("no series selected");
  const int xc = table.column(spec.x);
  if (xc < 0) invalid("unknown column '" + spec.x + "'");
  std::vector<int> ycs;
  for (const auto& name : spec.y) {
    const int c = table.column(name);
    if (c < 0) invalid("unknown column '" + name + "'");
    ycs.push_back(c);
  }

  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Series> series;
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = x_min;
  double y_max = -x_min;
  for (std::size_t s = 0; s < ycs.size(); ++s) {
    Series out{spec.y[s], {}};
    for (const auto& row : table.rows) {
      const double x = row[xc];
      const double y = row[ycs[s]];
      if (std::isnan(x) || std::isnan(y)) continue;
      if (!std::isfinite(x) || !std::isfinite(y)) invalid("infinite value in '" + spec.y[s] + "'");
      if (spec.log_x && x <= 0.0) invalid("nonpositive value on log x axis");
      if (spec.log_y && y <= 0.0) invalid("nonpositive value in '" + spec.y[s] + "' on log y axis");
      out.points.emplace_back(x, y);
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
    series.push_back(std::move(out));
  }
  if (!std::isfinite(x_min)) invalid("selection has no finite points");

  Axis ax{spec.log_x};
  Axis ay{spec.log_y};
  ax.fit(x_min, x_max);
  ay.fit(y_min, y_max);
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (ax.transform(x) - ax.lo) / (ax.hi - ax.lo) * plot_w; };
  const auto py = [&](double y) { return kTop + plot_h - (ay.transform(y) - ay.lo) / (ay.hi - ay.lo) * plot_h; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight, kWidth, kHeight);
  svg += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{:.2f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     kLeft + plot_w / 2, escape(spec.title));
  svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n",
                     kLeft, kTop, plot_w, plot_h);
  for (double t : ax.ticks()) {
    const double x = px(t);
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#ddd\"/>\n", x, kTop,
                       kTop + plot_h);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x, kTop + plot_h + 18,
                       ax.label(t));
  }
  for (double t : ay.ticks()) {
    const double y = py(t);
    svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>\n", kLeft, y,
                       kLeft + plot_w);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", kLeft - 6, y + 4, ay.label(t));
  }
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", kLeft + plot_w / 2,
                     kHeight - 12, escape(spec.x_label.empty() ? spec.x : spec.x_label));
  svg += fmt::format("<text x=\"16\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.2f})\">{1}</text>\n",
                     kTop + plot_h / 2, escape(spec.y_label));

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % kColors.size()];
    if (!series[s].points.empty()) {
      std::string pts;
      for (const auto& [x, y] : series[s].points) {
        if (!pts.empty()) pts += ' ';
        pts += fmt::format("{:.2f},{:.2f}", px(x), py(y));
      }
      svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
    }
    const double ly = kTop + 12 + 18 * static_cast<double>(s);
    const double lx = kLeft + plot_w + 12;
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       lx, ly, lx + 20, ly, color);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 26, ly + 4, escape(series[s].name));
  }
  svg += "</svg>\n";
  return svg;
}

void emit_svg(const ResultTable& table, const PlotSpec& spec, const std::filesystem::path& path) {
  write_text(path, render_svg(table, spec));
}

}  // namespace quasihom::cli
