#include "quasihom/sparse.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <vector>

#include "quasihom/error.hpp"

namespace quasihom {

namespace {

using ColMajorMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Cholesky = Eigen::SimplicialLDLT<ColMajorMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
using Pcg = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>>;

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kRefinementSteps = 3;

double max_abs(const SparseMatrix& a) {
  double m = 0.0;
  for (int k = 0; k < a.nonZeros(); ++k) m = std::max(m, std::abs(a.valuePtr()[k]));
  return m;
}

}  // namespace

void check_symmetric(const SparseMatrix& a) {
  if (a.rows() != a.cols()) fail(ErrorCode::kAsymmetricMatrix, "matrix is not square");
  const SparseMatrix diff = SparseMatrix(a.transpose()) - a;
  const double scale = max_abs(a);
  if (max_abs(diff) > 1e-12 * scale) fail(ErrorCode::kAsymmetricMatrix, "matrix is not symmetric");
}

struct SpdSolver::Impl {
  SparseMatrix a;
  SolveOptions options;
  double norm_a = 0.0;
  std::optional<Cholesky> cholesky;
  std::optional<Pcg> pcg;
  mutable std::mutex pcg_mutex;

  // Relative residual a backward-stable solve can be expected to reach.
  double attainable(const Vector& x, const Vector& b) const {
    return 1e3 * kEps * norm_a * x.norm() / b.norm();
  }

  Vector solve_direct(const Vector& b) const {
    Vector x = cholesky->solve(b);
    Vector r = b - a * x;
    const double target = options.tol * b.norm();
    for (int step = 0; step < kRefinementSteps && r.norm() > target; ++step) {
      x += cholesky->solve(r);
      r = b - a * x;
    }
    const double achieved = r.norm() / b.norm();
    if (!std::isfinite(achieved) || (achieved > options.tol && achieved > attainable(x, b))) {
      throw NonConvergence(achieved, "sparse LDL^T solve");
    }
    return x;
  }

  Vector solve_pcg(const Vector& b) const {
    std::lock_guard lock(pcg_mutex);
    Vector x = pcg->solve(b);
    if (pcg->info() != Eigen::Success) throw NonConvergence(pcg->error(), "preconditioned CG hit its iteration cap");
    return x;
  }

  Vector solve(const Vector& b) const {
    if (b.size() != a.rows()) fail(ErrorCode::kDimensionMismatch, "right-hand side size");
    if (b.squaredNorm() == 0.0) return Vector::Zero(b.size());
    return options.method == SpdMethod::kDirect ? solve_direct(b) : solve_pcg(b);
  }
};

SpdSolver::SpdSolver(const SparseMatrix& a, SolveOptions options) : impl_(std::make_unique<Impl>()) {
  check_symmetric(a);
  impl_->a = a;
  impl_->a.makeCompressed();
  impl_->options = options;
  impl_->norm_a = a.norm();
  if (a.rows() == 0) return;
  if (options.method == SpdMethod::kDirect) {
    impl_->cholesky.emplace();
    impl_->cholesky->compute(ColMajorMatrix(a));
    if (impl_->cholesky->info() != Eigen::Success || (impl_->cholesky->vectorD().array() <= 0.0).any()) {
      fail(ErrorCode::kSingularMatrix, "matrix is not positive definite");
    }
  } else {
    impl_->pcg.emplace();
    impl_->pcg->setTolerance(options.tol);
    impl_->pcg->setMaxIterations(options.max_iters > 0 ? options.max_iters : 20 * static_cast<int>(a.rows()));
    impl_->pcg->compute(impl_->a);
  }
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

int SpdSolver::size() const noexcept { return static_cast<int>(impl_->a.rows()); }

Vector SpdSolver::solve(const Vector& b) const { return impl_->solve(b); }

DenseMatrix SpdSolver::solve(const DenseMatrix& b) const {
  if (b.rows() != impl_->a.rows()) fail(ErrorCode::kDimensionMismatch, "right-hand side rows");
  if (impl_->options.method == SpdMethod::kPcg) {
    DenseMatrix x(b.rows(), b.cols());
    for (Eigen::Index c = 0; c < b.cols(); ++c) x.col(c) = impl_->solve(b.col(c));
    return x;
  }
  DenseMatrix x = impl_->cholesky->solve(b);
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    const Vector bc = b.col(c);
    if (bc.squaredNorm() == 0.0) continue;
    const double residual = (bc - impl_->a * x.col(c)).norm() / bc.norm();
    if (residual > impl_->options.tol) x.col(c) = impl_->solve_direct(bc);
  }
  return x;
}

Vector solve_spd(const SparseMatrix& a, const Vector& b, SolveOptions options) {
  return SpdSolver(a, options).solve(b);
}

SaddleSolver::SaddleSolver(const SparseMatrix& a, const SparseMatrix& b, SolveOptions options)
    : a_solver_(a, options), b_(b) {
  if (b.cols() != a.rows()) fail(ErrorCode::kDimensionMismatch, "constraint matrix columns");
  if (b.rows() > a.rows()) fail(ErrorCode::kRankDeficient, "more constraints than unknowns");
  if (b.rows() == 0) {
    y_.resize(a.rows(), 0);
    return;
  }
  y_ = a_solver_.solve(DenseMatrix(b.transpose()));
  DenseMatrix s = b_ * y_;
  s = 0.5 * (s + s.transpose()).eval();
  schur_.compute(s);
  const auto& d = schur_.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  if (schur_.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * d_max)) {
    fail(ErrorCode::kRankDeficient, "constraint Schur complement is singular");
  }
}

SaddleSolution SaddleSolver::solve(const Vector& rhs_primal, const Vector& rhs_constraint) const {
  if (rhs_primal.size() != num_primal() || rhs_constraint.size() != num_constraints()) {
    fail(ErrorCode::kDimensionMismatch, "saddle right-hand side sizes");
  }
  SaddleSolution out;
  out.x = a_solver_.solve(rhs_primal);
  if (num_constraints() == 0) {
    out.lambda.resize(0);
    return out;
  }
  out.lambda = schur_.solve(Vector(b_ * out.x - rhs_constraint));
  out.x -= y_ * out.lambda;
  return out;
}

Vector SaddleSolver::solve_homogeneous(const Vector& rhs_constraint) const {
  if (rhs_constraint.size() != num_constraints()) fail(ErrorCode::kDimensionMismatch, "constraint rhs size");
  if (num_constraints() == 0) return Vector::Zero(num_primal());
  return y_ * schur_.solve(rhs_constraint);
}

SaddleSolution solve_saddle(const SaddleSystem& system, SolveOptions options) {
  return SaddleSolver(system.a, system.b, options).solve(system.rhs_primal, system.rhs_constraint);
}

SparseMatrix submatrix(const SparseMatrix& a, std::span<const int> rows, std::span<const int> cols) {
  std::vector<int> column_map(a.cols(), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) column_map[cols[j]] = static_cast<int>(j);
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseMatrix::InnerIterator it(a, rows[i]); it; ++it) {
      const int j = column_map[it.col()];
      if (j >= 0) entries.emplace_back(static_cast<int>(i), j, it.value());
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(entries.begin(), entries.end());
  out.makeCompressed();
  return out;
}

SparseMatrix restrict_matrix(const SparseMatrix& a, std::span<const int> keep) { return submatrix(a, keep, keep); }

}  // namespace quasihom
