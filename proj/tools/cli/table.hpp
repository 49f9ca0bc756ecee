#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace quasihom::cli {

/// Rectangular table of decimals. NaN marks a missing value.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  explicit ResultTable(std::vector<std::string> cols = {}) : columns(std::move(cols)) {}
  /// Throws invalid-argument unless the row has one value per column.
  void add_row(std::vector<double> row);
  int column(const std::string& name) const;  // -1 if absent
};

/// Header row then one line per row, 17 significant digits. Metadata goes to
/// a sibling "<name>.meta" file of key=value lines so the CSV stays plain.
void write_csv(const ResultTable& table, const std::filesystem::path& path);
std::string to_csv(const ResultTable& table);

struct PlotSpec {
  std::string title;
  std::string x;               // column plotted along x
  std::vector<std::string> y;  // one series per column
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Static SVG line chart. NaN cells are skipped; an empty selection, a missing
/// column or a nonpositive value on a log axis is an invalid-selection error
/// and no file is written. Output bytes depend only on the input.
void emit_svg(const ResultTable& table, const PlotSpec& spec, const std::filesystem::path& path);
std::string render_svg(const ResultTable& table, const PlotSpec& spec);

}  // namespace quasihom::cli
