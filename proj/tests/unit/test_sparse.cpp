#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <vector>

#include "quasihom/error.hpp"
#include "quasihom/sparse.hpp"

using namespace quasihom;

namespace {

SparseMatrix from_dense(const DenseMatrix& d) {
  SparseMatrix s = d.sparseView();
  s.makeCompressed();
  return s;
}

DenseMatrix random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

// Independent reference: LU on the full KKT block matrix.
Vector kkt_solve(const DenseMatrix& a, const DenseMatrix& b, const Vector& f, const Vector& g) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.rows());
  DenseMatrix k = DenseMatrix::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = a;
  k.topRightCorner(n, m) = b.transpose();
  k.bottomLeftCorner(m, n) = b;
  Vector rhs(n + m);
  rhs << f, g;
  return k.partialPivLu().solve(rhs);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(Sparse, Identity) {
  const SparseMatrix id = from_dense(DenseMatrix::Identity(5, 5));
  const Vector b = Vector::LinSpaced(5, 1.0, 5.0);
  EXPECT_EQ(solve_spd(id, b), b);
}

TEST(Sparse, TwoByTwo) {
  DenseMatrix a(2, 2);
  a << 4, 1, 1, 3;
  Vector b(2);
  b << 1, 2;
  const Vector x = solve_spd(from_dense(a), b);
  EXPECT_NEAR(x(0), 1.0 / 11.0, 1e-15);
  EXPECT_NEAR(x(1), 7.0 / 11.0, 1e-15);
}

TEST(Sparse, RandomSpdBothMethods) {
  const DenseMatrix m = random_matrix(50, 50, 1);
  const DenseMatrix a = m.transpose() * m + DenseMatrix::Identity(50, 50);
  const Vector b = random_matrix(50, 1, 2).col(0);
  const Vector oracle = a.partialPivLu().solve(b);
  for (SpdMethod method : {SpdMethod::kDirect, SpdMethod::kPcg}) {
    const Vector x = solve_spd(from_dense(a), b, {1e-12, method, 0});
    EXPECT_LE((a * x - b).norm() / b.norm(), 1e-10);
    EXPECT_LE((x - oracle).norm() / oracle.norm(), 1e-8);
  }
}

TEST(Sparse, SolverReuseAndMultipleColumns) {
  const DenseMatrix m = random_matrix(20, 20, 3);
  const DenseMatrix a = m.transpose() * m + DenseMatrix::Identity(20, 20);
  const SpdSolver solver(from_dense(a));
  EXPECT_EQ(solver.size(), 20);
  const DenseMatrix b = random_matrix(20, 4, 4);
  const DenseMatrix x = solver.solve(b);
  EXPECT_LE((a * x - b).norm() / b.norm(), 1e-12);
  EXPECT_LE((solver.solve(Vector(b.col(2))) - x.col(2)).norm(), 1e-13);
}

TEST(Sparse, Errors) {
  DenseMatrix asym(2, 2);
  asym << 2, 1, 0, 2;
  EXPECT_EQ(code_of([&] { check_symmetric(from_dense(asym)); }), ErrorCode::kAsymmetricMatrix);
  EXPECT_EQ(code_of([&] { solve_spd(from_dense(asym), Vector::Ones(2)); }), ErrorCode::kAsymmetricMatrix);
  DenseMatrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_EQ(code_of([&] { solve_spd(from_dense(indefinite), Vector::Ones(2)); }), ErrorCode::kSingularMatrix);
  EXPECT_EQ(code_of([] { solve_spd(from_dense(DenseMatrix::Identity(3, 3)), Vector::Ones(2)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(Sparse, SaddleTwoByOne) {
  // min x^2 + y^2 subject to x + y = 1.
  SaddleSystem s;
  s.a = from_dense(2.0 * DenseMatrix::Identity(2, 2));
  s.b = from_dense(DenseMatrix::Ones(1, 2));
  s.rhs_primal = Vector::Zero(2);
  s.rhs_constraint = Vector::Ones(1);
  const SaddleSolution sol = solve_saddle(s);
  EXPECT_NEAR(sol.x(0), 0.5, 1e-15);
  EXPECT_NEAR(sol.x(1), 0.5, 1e-15);
  EXPECT_NEAR(sol.lambda(0), -1.0, 1e-15);
}

TEST(Sparse, SaddleMatchesKkt) {
  const int n = 30;
  const int m = 6;
  const DenseMatrix r = random_matrix(n, n, 5);
  const DenseMatrix a = r.transpose() * r + 0.5 * DenseMatrix::Identity(n, n);
  const DenseMatrix b = random_matrix(m, n, 6);
  const Vector f = random_matrix(n, 1, 7).col(0);
  const Vector g = random_matrix(m, 1, 8).col(0);
  const Vector oracle = kkt_solve(a, b, f, g);
  const SaddleSolver solver(from_dense(a), from_dense(b));
  EXPECT_EQ(solver.num_primal(), n);
  EXPECT_EQ(solver.num_constraints(), m);
  const SaddleSolution sol = solver.solve(f, g);
  EXPECT_LE((sol.x - oracle.head(n)).norm() / oracle.head(n).norm(), 1e-10);
  EXPECT_LE((sol.lambda - oracle.tail(m)).norm() / oracle.tail(m).norm(), 1e-10);
  const Vector x0 = solver.solve_homogeneous(g);
  EXPECT_LE((x0 - kkt_solve(a, b, Vector::Zero(n), g).head(n)).norm(), 1e-10 * x0.norm());

  // Constrained minimality: feasible perturbations in ker B raise the objective.
  const auto objective = [&](const Vector& x) { return 0.5 * x.dot(a * x) - f.dot(x); };
  const Eigen::FullPivLU<DenseMatrix> lu(b);
  const DenseMatrix kernel = lu.kernel();
  for (int k = 0; k < kernel.cols(); ++k) {
    const Vector d = kernel.col(k) * 1e-3;
    EXPECT_GT(objective(sol.x + d), objective(sol.x));
    EXPECT_GT(objective(sol.x - d), objective(sol.x));
  }
  EXPECT_LE((b * sol.x - g).norm(), 1e-10 * g.norm());
}

TEST(Sparse, SaddleRankDeficient) {
  DenseMatrix b(2, 3);
  b << 1, 1, 0, 2, 2, 0;
  EXPECT_EQ(code_of([&] { SaddleSolver(from_dense(DenseMatrix::Identity(3, 3)), from_dense(b)); }),
            ErrorCode::kRankDeficient);
  EXPECT_EQ(code_of([] { SaddleSolver(from_dense(DenseMatrix::Identity(2, 2)), from_dense(DenseMatrix::Ones(3, 2))); }),
            ErrorCode::kRankDeficient);
}

TEST(Sparse, Submatrices) {
  DenseMatrix d(4, 4);
  d << 1, 2, 0, 3, 2, 4, 5, 0, 0, 5, 6, 7, 3, 0, 7, 8;
  const SparseMatrix s = from_dense(d);
  const std::vector<int> keep{0, 2, 3};
  const DenseMatrix r = DenseMatrix(restrict_matrix(s, keep));
  DenseMatrix expected(3, 3);
  expected << 1, 0, 3, 0, 6, 7, 3, 7, 8;
  EXPECT_EQ(r, expected);
  const std::vector<int> rows{3, 1};
  const std::vector<int> cols{1, 2};
  DenseMatrix sub(2, 2);
  sub << 0, 7, 4, 5;
  EXPECT_EQ(DenseMatrix(submatrix(s, rows, cols)), sub);
}
