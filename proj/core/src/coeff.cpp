#include "quasihom/coeff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "quasihom/error.hpp"

namespace quasihom {

const char* to_string(CoefficientKind kind) {
  switch (kind) {
    case CoefficientKind::kMstrig: return "mstrig";
    case CoefficientKind::kGrid: return "grid";
    case CoefficientKind::kConstant: return "constant";
    case CoefficientKind::kChannels: return "channels";
  }
  return "unknown";
}

double mstrig_eval(double x, double y) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  constexpr double e1 = 1.0 / 5.0, e2 = 1.0 / 13.0, e3 = 1.0 / 17.0, e4 = 1.0 / 31.0, e5 = 1.0 / 65.0;
  const double sum = (1.1 + std::sin(two_pi * x / e1)) / (1.1 + std::sin(two_pi * y / e1)) +
                     (1.1 + std::sin(two_pi * y / e2)) / (1.1 + std::cos(two_pi * x / e2)) +
                     (1.1 + std::cos(two_pi * x / e3)) / (1.1 + std::sin(two_pi * y / e3)) +
                     (1.1 + std::sin(two_pi * y / e4)) / (1.1 + std::cos(two_pi * x / e4)) +
                     (1.1 + std::cos(two_pi * x / e5)) / (1.1 + std::sin(two_pi * y / e5)) +
                     std::sin(4.0 * x * x * y * y) + 1.0;
  return sum / 6.0;
}

CoefficientField CoefficientField::mstrig() {
  CoefficientField f;
  f.kind_ = CoefficientKind::kMstrig;
  return f;
}

CoefficientField CoefficientField::constant(double value) {
  if (!(value > 0.0)) fail(ErrorCode::kNonPositiveValue, "constant coefficient must be positive");
  CoefficientField f;
  f.kind_ = CoefficientKind::kConstant;
  f.constant_ = value;
  return f;
}

CoefficientField CoefficientField::grid(int rows, int cols, std::vector<double> values, Extent extent,
                                        CoefficientKind kind) {
  if (rows < 1 || cols < 1) fail(ErrorCode::kInvalidArgument, "grid dimensions must be >= 1");
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    fail(ErrorCode::kDimensionMismatch, "expected " + std::to_string(rows * cols) + " values, got " +
                                            std::to_string(values.size()));
  }
  if (!(extent.x1 > extent.x0) || !(extent.y1 > extent.y0)) {
    fail(ErrorCode::kInvalidArgument, "grid extent must have positive size");
  }
  for (double v : values) {
    if (!(v > 0.0)) fail(ErrorCode::kNonPositiveValue, "grid values must be positive");
  }
  CoefficientField f;
  f.kind_ = kind;
  f.rows_ = rows;
  f.cols_ = cols;
  f.values_ = std::move(values);
  f.extent_ = extent;
  return f;
}

double CoefficientField::operator()(double x, double y) const {
  switch (kind_) {
    case CoefficientKind::kMstrig: return mstrig_eval(x, y);
    case CoefficientKind::kConstant: return constant_;
    case CoefficientKind::kGrid:
    case CoefficientKind::kChannels: {
      const double fx = (x - extent_.x0) / (extent_.x1 - extent_.x0) * cols_;
      const double fy = (y - extent_.y0) / (extent_.y1 - extent_.y0) * rows_;
      const int col = std::clamp(static_cast<int>(std::floor(fx)), 0, cols_ - 1);
      const int row = std::clamp(static_cast<int>(std::floor(fy)), 0, rows_ - 1);
      return values_[static_cast<std::size_t>(row) * cols_ + col];
    }
  }
  return constant_;
}

CoefficientField load_grid(const std::filesystem::path& path, int rows, int cols, Extent extent) {
  if (rows < 1 || cols < 1) fail(ErrorCode::kInvalidArgument, "grid dimensions must be >= 1");
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open '" + path.string() + "'");

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(rows) * cols);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) {
      double v = 0.0;
      std::size_t consumed = 0;
      try {
        v = std::stod(token, &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed != token.size()) throw ParseError(line_number, "not a decimal: '" + token + "'");
      if (!(v > 0.0)) {
        fail(ErrorCode::kNonPositiveValue, "line " + std::to_string(line_number) + ": value " + token);
      }
      values.push_back(v);
    }
  }
  if (in.bad()) fail(ErrorCode::kIoError, "read failure on '" + path.string() + "'");
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    fail(ErrorCode::kDimensionMismatch, "'" + path.string() + "' holds " + std::to_string(values.size()) +
                                            " values, expected " + std::to_string(rows) + "x" +
                                            std::to_string(cols));
  }
  return CoefficientField::grid(rows, cols, std::move(values), extent);
}

namespace {

// Uniform [0, 1) from the raw engine output; std distributions are not
// reproducible across standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

CoefficientField synth_channels(int rows, int cols, int n_channels, double contrast, std::uint64_t seed,
                                Extent extent) {
  if (rows < 1 || cols < 1 || n_channels < 1) fail(ErrorCode::kInvalidArgument, "counts must be >= 1");
  if (!(contrast > 1.0)) fail(ErrorCode::kInvalidArgument, "contrast must exceed 1");
  if (rows * cols < 2) fail(ErrorCode::kInvalidArgument, "channel field needs at least two cells");

  std::mt19937_64 rng(seed);
  std::vector<double> values(static_cast<std::size_t>(rows) * cols, 1.0);
  // Half-width in cells; bands together cover at most about half the rows.
  const double half_width = std::max(0.5, 0.25 * rows / n_channels);
  for (int c = 0; c < n_channels; ++c) {
    const double base = (c + 0.5 + 0.5 * (unit(rng) - 0.5)) * rows / n_channels;
    const double amplitude = (0.3 + 0.7 * unit(rng)) * 0.5 * rows / n_channels;
    const double waves = 1.0 + 2.0 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (int col = 0; col < cols; ++col) {
      const double s = (col + 0.5) / cols;
      const double center = base + amplitude * std::sin(2.0 * std::numbers::pi * waves * s + phase);
      for (int row = 0; row < rows; ++row) {
        if (std::abs(row + 0.5 - center) <= half_width) values[static_cast<std::size_t>(row) * cols + col] = contrast;
      }
    }
  }
  // Guarantee both extremes occur.
  values.front() = 1.0;
  values[static_cast<std::size_t>(rows / 2) * cols + cols / 2] = contrast;
  return CoefficientField::grid(rows, cols, std::move(values), extent, CoefficientKind::kChannels);
}

double ElementCoefficients::min() const { return *std::min_element(values.begin(), values.end()); }
double ElementCoefficients::max() const { return *std::max_element(values.begin(), values.end()); }

ElementCoefficients sample_on_mesh(const CoefficientField& field, const Mesh& mesh) {
  if (field.gridded()) {
    constexpr double slack = 1e-12;
    const Extent& e = field.extent();
    const double scale = std::max(mesh.domain().lx, mesh.domain().ly);
    if (e.x0 > slack * scale || e.y0 > slack * scale || e.x1 < mesh.domain().lx * (1.0 - slack) ||
        e.y1 < mesh.domain().ly * (1.0 - slack)) {
      fail(ErrorCode::kOutOfExtent, "mesh domain is not covered by the coefficient grid");
    }
  }
  ElementCoefficients out;
  out.mesh_id = mesh_fingerprint(mesh);
  out.values.resize(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Point c = mesh.barycenter(t);
    out.values[t] = field(c.x, c.y);
  }
  return out;
}

}  // namespace quasihom
