#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "quasihom/fem.hpp"
#include "quasihom/mesh.hpp"
#include "quasihom/sparse.hpp"

namespace quasihom {

/// Integrals of the fine free hats over each coarse triangle:
/// matrix(i, j) = int_{T_i} lambda_j.
struct MeasurementSet {
  SparseMatrix matrix;  // num_coarse x num_dofs

  int num_coarse() const noexcept { return static_cast<int>(matrix.rows()); }
};

MeasurementSet build_measurements(const Mesh& coarse, const FemSpace& fine);

/// Layer count that stands for "no localization".
inline constexpr int kGlobalLayers = -1;

/// max(2, ceil(log2(1/H))).
int default_layers(double h_coarse);

struct SparseBasis {
  std::vector<int> dofs;  // ascending
  Vector values;
};

struct PatchDofs {
  std::vector<int> interior;     // free dofs the basis may use, ascending
  std::vector<int> constraints;  // coarse triangles measured inside the patch, ascending
};

/// One basis function per coarse triangle, each minimizing phi^T A phi under
/// int_{T_j} phi = delta_ij for every T_j in its patch.
struct CoarseSpace {
  int num_dofs = 0;
  int layers = kGlobalLayers;
  std::vector<SparseBasis> bases;
  std::vector<std::uint64_t> built_from;  // operator fingerprint per basis
  std::vector<char> stale;                // basis older than the last operator it was offered
  std::vector<PatchDofs> patches;

  int size() const noexcept { return static_cast<int>(bases.size()); }
  Vector dense(int i) const;
  /// R with the bases as rows (size x num_dofs).
  SparseMatrix basis_matrix() const;
};

CoarseSpace compute_basis(const LinearizedOperator& a, const MeasurementSet& meas, const FemSpace& space,
                          int layers, SolveOptions options = {});

/// Recomputes only the listed bases for operator `a` and refreshes the stale
/// flags of all others against it.
void update_basis(CoarseSpace& coarse, const LinearizedOperator& a, const MeasurementSet& meas,
                  std::span<const int> which, SolveOptions options = {});

/// w_I = sum_i (int_{T_i} w) phi_i.
Vector interpolate(const Vector& w, const CoarseSpace& coarse, const MeasurementSet& meas);

struct CoarseSolution {
  Vector w;
  int mismatched_bases = 0;  // bases built for a different operator than `a`
};

/// Galerkin solve of (R A R^T) c = R rhs, expanded back to R^T c.
CoarseSolution coarse_solve(const LinearizedOperator& a, const Vector& rhs, const CoarseSpace& coarse);

/// phi^T A_incr phi, with A_incr assembled at the increment u^{n+1} - u^n.
double update_indicator(const LinearizedOperator& a_incr, const SparseBasis& basis);

/// Binary basis cache. Loading returns nullopt unless the header matches the
/// expected fingerprints, size and layer count; values round-trip bit-exactly.
void save_basis_cache(const std::filesystem::path& path, const CoarseSpace& coarse, std::uint64_t mesh_id,
                      std::uint64_t operator_id);
std::optional<CoarseSpace> load_basis_cache(const std::filesystem::path& path, std::uint64_t mesh_id,
                                            std::uint64_t operator_id, int size, int layers);

}  // namespace quasihom
