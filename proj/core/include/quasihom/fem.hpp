#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "quasihom/coeff.hpp"
#include "quasihom/mesh.hpp"
#include "quasihom/nfunc.hpp"
#include "quasihom/sparse.hpp"

namespace quasihom {

using Gradient = Eigen::Vector2d;

/// Per-triangle data of the P1 space: hat gradients (constant on the
/// triangle) and the free-node index of each vertex, -1 on the boundary.
struct ElementGeometry {
  double area = 0.0;
  std::array<Gradient, 3> grad;
  std::array<int, 3> dofs{};
};

/// Continuous P1 functions vanishing on the mesh boundary. Unknowns ("dofs")
/// are the free nodes in ascending node order. Owns a fixed sparsity pattern
/// so operator assembly is a scatter into preallocated storage.
class FemSpace {
 public:
  explicit FemSpace(Mesh mesh);

  const Mesh& mesh() const noexcept { return mesh_; }
  int num_dofs() const noexcept { return static_cast<int>(dof_nodes_.size()); }
  int num_elements() const noexcept { return static_cast<int>(elements_.size()); }
  /// Free-node index of a mesh node, -1 for boundary nodes.
  int dof(int node) const { return node_dof_[node]; }
  const std::vector<int>& dof_nodes() const noexcept { return dof_nodes_; }
  const ElementGeometry& element(int t) const { return elements_[t]; }
  std::uint64_t mesh_id() const noexcept { return mesh_id_; }

  /// Sums area * (w0 grad_i . grad_j + w1 (d . grad_i)(d . grad_j)) over
  /// elements, where (w0, w1, d) come from `weights(t)`; w1 may be zero.
  struct ElementWeights {
    double isotropic = 0.0;
    double rank_one = 0.0;
    Gradient direction = Gradient::Zero();
  };
  SparseMatrix assemble(const std::function<ElementWeights(int)>& weights) const;

  /// Nodal vector (all mesh nodes) restricted to the free nodes, and back.
  Vector restrict_nodal(const Vector& nodal) const;
  Vector extend(const Vector& u) const;

 private:
  Mesh mesh_;
  std::uint64_t mesh_id_ = 0;
  std::vector<int> node_dof_;
  std::vector<int> dof_nodes_;
  std::vector<ElementGeometry> elements_;
  SparseMatrix pattern_;
  std::vector<std::array<int, 9>> slots_;  // value index per local (i, j), -1 if off the free block
};

/// A discrete function together with its element gradients.
class FemState {
 public:
  FemState(std::shared_ptr<const FemSpace> space, Vector u);

  const FemSpace& space() const noexcept { return *space_; }
  const std::shared_ptr<const FemSpace>& space_ptr() const noexcept { return space_; }
  const Vector& u() const noexcept { return u_; }
  const std::vector<Gradient>& gradients() const noexcept { return grads_; }
  double grad_norm(int t) const { return grads_[t].norm(); }

  void set(Vector u);

 private:
  std::shared_ptr<const FemSpace> space_;
  Vector u_;
  std::vector<Gradient> grads_;
};

std::vector<Gradient> element_gradients(const FemSpace& space, const Vector& u);

/// Everything that defines the discrete energy
///   J(u) = sum_T area kappa_T phi(|grad u|_T) - load . u.
struct Problem {
  std::shared_ptr<const FemSpace> space;
  ElementCoefficients kappa;
  NFunction nf = NFunction::power(2.0);
  Vector load;
};

using Source = std::function<double(double, double)>;

/// Consistent P1 mass matrix over the free nodes.
SparseMatrix assemble_mass(const FemSpace& space);
/// Mass matrix over every mesh node, boundary included.
SparseMatrix assemble_mass_full(const Mesh& mesh);
/// Load vector: the nodal interpolant of f paired with each free hat
/// through the full mass matrix.
Vector load_vector(const FemSpace& space, const Source& f);
/// sum_T area kappa_T grad_i . grad_j.
SparseMatrix assemble_stiffness(const FemSpace& space, const ElementCoefficients& kappa);

Problem make_problem(std::shared_ptr<const FemSpace> space, ElementCoefficients kappa, NFunction nf,
                     const Source& f);

double energy(const Problem& problem, const FemState& state);
/// J'(u)(lambda_i) for every free hat.
Vector residual(const Problem& problem, const FemState& state);

enum class OperatorMode { kGd, kPgd, kNewton };

const char* to_string(OperatorMode mode);

struct LinearizedOperator {
  OperatorMode mode = OperatorMode::kPgd;
  SparseMatrix matrix;
  std::uint64_t built_at = 0;
};

/// GD: plain Laplacian. PGD: weight kappa phi'(t)/t. Newton: PGD plus
/// kappa (phi''(t) t - phi'(t)) / t^3 (grad u . grad v)(grad u . grad w),
/// the rank-one part dropped where grad u = 0.
LinearizedOperator assemble_linearized(const Problem& problem, const FemState& state, OperatorMode mode);

/// Hash of the mode, the N-function parameters and the per-element weights
/// rounded to 1e-12 relative.
std::uint64_t operator_fingerprint(const Problem& problem, const FemState& state, OperatorMode mode);

/// sum_T area kappa_T phi''(|grad u| + |grad w|) |grad w|^2.
double quasi_norm(const Problem& problem, const FemState& u, const FemState& w);

/// J(u) - J(v) - J'(v)(u - v).
double bregman(const Problem& problem, const FemState& u, const FemState& v);

/// sqrt(r^T M^{-1} r): the dual norm of the residual functional with respect
/// to the L2 pairing on the discrete space.
double residual_l2h_norm(const Vector& r, const SpdSolver& mass);
double residual_l2h_norm(const Vector& r, const SparseMatrix& mass, double tol = 1e-12);

struct ErrorNorms {
  double h1 = 0.0;   // |u - v|_{H^1}
  double w1p = 0.0;  // |u - v|_{W^{1,p}}
};

ErrorNorms error_norms(const FemSpace& space, const Vector& u, const Vector& v, double p);

double quadratic_form(const SparseMatrix& a, const Vector& x);

}  // namespace quasihom
