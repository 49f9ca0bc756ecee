#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "quasihom/mesh.hpp"

namespace quasihom {

/// Physical rectangle covered by a gridded field.
struct Extent {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;
};

enum class CoefficientKind { kMstrig, kGrid, kConstant, kChannels };

const char* to_string(CoefficientKind kind);

/// Multiscale trigonometric coefficient: average of five oscillatory ratios at
/// the scales 1/5, 1/13, 1/17, 1/31, 1/65 and the smooth term sin(4x^2y^2)+1.
double mstrig_eval(double x, double y);

/// Heterogeneous coefficient kappa(x, y) > 0. Gridded kinds (grid, channels)
/// are cell-centered with row 0 at y0; points map to their containing cell,
/// clamped at the edges.
class CoefficientField {
 public:
  static CoefficientField mstrig();
  static CoefficientField constant(double value);
  static CoefficientField grid(int rows, int cols, std::vector<double> values, Extent extent,
                               CoefficientKind kind = CoefficientKind::kGrid);

  CoefficientKind kind() const noexcept { return kind_; }
  double operator()(double x, double y) const;

  bool gridded() const noexcept { return kind_ == CoefficientKind::kGrid || kind_ == CoefficientKind::kChannels; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const Extent& extent() const noexcept { return extent_; }

 private:
  CoefficientKind kind_ = CoefficientKind::kConstant;
  double constant_ = 1.0;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
  Extent extent_;
};

/// Reads rows * cols whitespace-separated positive decimals, row-major with
/// row 0 at y-min.
CoefficientField load_grid(const std::filesystem::path& path, int rows, int cols, Extent extent);

/// Background 1 crossed by n_channels meandering horizontal bands of value
/// `contrast`. Deterministic for a given seed.
CoefficientField synth_channels(int rows, int cols, int n_channels, double contrast, std::uint64_t seed,
                                Extent extent = {});

/// One kappa value per triangle.
struct ElementCoefficients {
  std::vector<double> values;
  std::uint64_t mesh_id = 0;

  double min() const;
  double max() const;
  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t t) const { return values[t]; }
};

/// Evaluates the field at every triangle barycenter.
ElementCoefficients sample_on_mesh(const CoefficientField& field, const Mesh& mesh);

}  // namespace quasihom
