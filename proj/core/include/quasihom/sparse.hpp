#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <span>

namespace quasihom {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
/// Compressed row storage with sorted, unique column indices per row
/// (always kept in compressed mode).
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class SpdMethod {
  kDirect,  // sparse LDL^T with iterative refinement
  kPcg,     // conjugate gradients, Jacobi preconditioner
};

struct SolveOptions {
  double tol = 1e-10;  // relative residual ||Ax - b|| / ||b||
  SpdMethod method = SpdMethod::kDirect;
  int max_iters = 0;   // PCG cap; 0 means 20 n
};

/// Throws asymmetric-matrix unless |A_ij - A_ji| <= 1e-12 max|A| everywhere.
void check_symmetric(const SparseMatrix& a);

/// Reusable solver for a symmetric positive definite matrix. The factorization
/// (or preconditioner) is computed once; solve() is const and may be called
/// from several threads.
class SpdSolver {
 public:
  explicit SpdSolver(const SparseMatrix& a, SolveOptions options = {});
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  int size() const noexcept;
  Vector solve(const Vector& b) const;
  DenseMatrix solve(const DenseMatrix& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Vector solve_spd(const SparseMatrix& a, const Vector& b, SolveOptions options = {});

/// min 1/2 x^T A x - rhs_primal^T x  subject to  B x = rhs_constraint.
struct SaddleSystem {
  SparseMatrix a;
  SparseMatrix b;  // m x n, m <= n, full row rank
  Vector rhs_primal;
  Vector rhs_constraint;
};

struct SaddleSolution {
  Vector x;
  Vector lambda;  // A x + B^T lambda = rhs_primal
};

/// Schur-complement solver: factors A once, forms Y = A^{-1} B^T and the dense
/// m x m complement S = B Y, after which each right-hand side costs one SPD
/// solve plus a dense m x m solve.
class SaddleSolver {
 public:
  SaddleSolver(const SparseMatrix& a, const SparseMatrix& b, SolveOptions options = {});

  int num_primal() const noexcept { return static_cast<int>(y_.rows()); }
  int num_constraints() const noexcept { return static_cast<int>(y_.cols()); }

  SaddleSolution solve(const Vector& rhs_primal, const Vector& rhs_constraint) const;
  /// Primal solution for rhs_primal = 0: x = Y S^{-1} g.
  Vector solve_homogeneous(const Vector& rhs_constraint) const;

 private:
  SpdSolver a_solver_;
  SparseMatrix b_;
  DenseMatrix y_;
  Eigen::LDLT<DenseMatrix> schur_;
};

SaddleSolution solve_saddle(const SaddleSystem& system, SolveOptions options = {});

/// Principal submatrix on the ascending index list `keep`.
SparseMatrix restrict_matrix(const SparseMatrix& a, std::span<const int> keep);
/// Rows `rows` (any order) and ascending columns `cols` of `a`.
SparseMatrix submatrix(const SparseMatrix& a, std::span<const int> rows, std::span<const int> cols);

}  // namespace quasihom
