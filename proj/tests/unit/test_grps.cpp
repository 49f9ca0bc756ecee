#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <random>

#include "quasihom/error.hpp"
#include "quasihom/grps.hpp"

using namespace quasihom;

namespace {

struct Instance {
  Mesh coarse;
  std::shared_ptr<const FemSpace> space;
  Problem problem;
  MeasurementSet meas;
  LinearizedOperator op;
};

Vector random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

Instance make_setup(int nc, int levels, double p) {
  Mesh coarse = build_coarse_mesh(nc, nc, 1.0, 1.0);
  auto space = std::make_shared<const FemSpace>(refine(coarse, levels));
  Problem problem = make_problem(space, sample_on_mesh(CoefficientField::mstrig(), space->mesh()), NFunction::power(p),
                                 [](double, double) { return 1.0; });
  MeasurementSet meas = build_measurements(coarse, *space);
  const FemState state(space, random_vector(space->num_dofs(), 1));
  LinearizedOperator op = assemble_linearized(problem, state, OperatorMode::kPgd);
  return {std::move(coarse), space, std::move(problem), std::move(meas), std::move(op)};
}

// Minimizer of phi^T A phi under B phi = e_i, via LU on the dense KKT matrix.
Vector kkt_basis(const DenseMatrix& a, const DenseMatrix& b, int i) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.rows());
  DenseMatrix k = DenseMatrix::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = a;
  k.topRightCorner(n, m) = b.transpose();
  k.bottomLeftCorner(m, n) = b;
  Vector rhs = Vector::Zero(n + m);
  rhs(n + i) = 1.0;
  return k.partialPivLu().solve(rhs).head(n);
}

}  // namespace

TEST(Grps, DefaultLayers) {
  EXPECT_EQ(default_layers(0.5), 2);
  EXPECT_EQ(default_layers(0.25), 2);
  EXPECT_EQ(default_layers(0.125), 3);
  EXPECT_EQ(default_layers(1.0 / 16), 4);
  EXPECT_EQ(default_layers(0.1), 4);
}

TEST(Grps, MeasurementsAreHatIntegrals) {
  const Instance s = make_setup(3, 2, 2.0);
  const Mesh& fine = s.space->mesh();
  DenseMatrix oracle = DenseMatrix::Zero(s.coarse.num_triangles(), s.space->num_dofs());
  for (int t = 0; t < fine.num_triangles(); ++t) {
    for (int v : fine.triangles()[t]) {
      const int d = s.space->dof(v);
      if (d >= 0) oracle(fine.parent(t), d) += fine.area(t) / 3.0;
    }
  }
  EXPECT_LE((DenseMatrix(s.meas.matrix) - oracle).norm(), 1e-15);
  // Interior hats integrate to h^2 in total.
  const double h = 1.0 / 12.0;
  for (int j = 0; j < s.space->num_dofs(); ++j) EXPECT_NEAR(oracle.col(j).sum(), h * h, 1e-16);
}

TEST(Grps, GlobalBasisMatchesKkt) {
  const Instance s = make_setup(2, 2, 3.0);
  const CoarseSpace coarse = compute_basis(s.op, s.meas, *s.space, kGlobalLayers);
  ASSERT_EQ(coarse.size(), 8);
  const DenseMatrix a = DenseMatrix(s.op.matrix);
  const DenseMatrix b = DenseMatrix(s.meas.matrix);
  for (int i = 0; i < coarse.size(); ++i) {
    const Vector oracle = kkt_basis(a, b, i);
    EXPECT_LE((coarse.dense(i) - oracle).norm(), 1e-9 * oracle.norm()) << i;
  }
}

TEST(Grps, LocalizedBasisBiorthogonalOnPatch) {
  const Instance s = make_setup(4, 2, 3.0);
  const CoarseSpace coarse = compute_basis(s.op, s.meas, *s.space, 1);
  const DenseMatrix b = DenseMatrix(s.meas.matrix);
  for (int i = 0; i < coarse.size(); ++i) {
    const PatchDofs& patch = coarse.patches[i];
    const Patch geometric = build_patch(s.coarse, i, 1);
    EXPECT_EQ(patch.constraints, geometric.elements);
    const Vector phi = coarse.dense(i);
    for (int j : patch.constraints) EXPECT_NEAR(b.row(j).dot(phi), i == j ? 1.0 : 0.0, 1e-10);
    for (int d = 0; d < s.space->num_dofs(); ++d) {
      if (!std::binary_search(patch.interior.begin(), patch.interior.end(), d)) {
        EXPECT_EQ(phi(d), 0.0);
      }
    }
  }
}

TEST(Grps, OptimalRecovery) {
  const Instance s = make_setup(2, 2, 3.0);
  const CoarseSpace coarse = compute_basis(s.op, s.meas, *s.space, kGlobalLayers);
  for (unsigned seed = 2; seed < 6; ++seed) {
    const Vector w = random_vector(s.space->num_dofs(), seed);
    const Vector wi = interpolate(w, coarse, s.meas);
    EXPECT_LE((s.meas.matrix * wi - s.meas.matrix * w).norm(), 1e-12 * (s.meas.matrix * w).norm());
    EXPECT_LE(quadratic_form(s.op.matrix, wi), quadratic_form(s.op.matrix, w));
    // The interpolant is a projection.
    EXPECT_LE((interpolate(wi, coarse, s.meas) - wi).norm(), 1e-10 * wi.norm());
  }
}

TEST(Grps, CoarseSolveIsGalerkin) {
  const Instance s = make_setup(4, 2, 2.0);
  const CoarseSpace coarse = compute_basis(s.op, s.meas, *s.space, 2);
  const Vector rhs = s.problem.load;
  const CoarseSolution sol = coarse_solve(s.op, rhs, coarse);
  EXPECT_EQ(sol.mismatched_bases, 0);
  DenseMatrix r(coarse.size(), s.space->num_dofs());
  for (int i = 0; i < coarse.size(); ++i) r.row(i) = coarse.dense(i).transpose();
  const DenseMatrix a = DenseMatrix(s.op.matrix);
  const Vector c = (r * a * r.transpose()).ldlt().solve(r * rhs);
  EXPECT_LE((sol.w - r.transpose() * c).norm(), 1e-10 * sol.w.norm());
  EXPECT_EQ(coarse_solve(s.op, Vector::Zero(rhs.size()), coarse).w.norm(), 0.0);
}

TEST(Grps, UpdateBasisAndStaleness) {
  const Instance s = make_setup(4, 2, 3.0);
  CoarseSpace coarse = compute_basis(s.op, s.meas, *s.space, 1);
  const FemState other(s.space, random_vector(s.space->num_dofs(), 9));
  const LinearizedOperator op2 = assemble_linearized(s.problem, other, OperatorMode::kPgd);
  ASSERT_NE(op2.built_at, s.op.built_at);
  EXPECT_EQ(coarse_solve(op2, s.problem.load, coarse).mismatched_bases, coarse.size());
  const std::vector<int> which{0, 5};
  update_basis(coarse, op2, s.meas, which);
  EXPECT_EQ(coarse.built_from[0], op2.built_at);
  EXPECT_EQ(coarse.stale[0], 0);
  EXPECT_EQ(coarse.stale[1], 1);
  EXPECT_EQ(coarse_solve(op2, s.problem.load, coarse).mismatched_bases, coarse.size() - 2);
  const CoarseSpace fresh = compute_basis(op2, s.meas, *s.space, 1);
  EXPECT_EQ(coarse.bases[5].values, fresh.bases[5].values);
  const std::vector<int> bad{99};
  EXPECT_THROW(update_basis(coarse, op2, s.meas, bad), Error);
}

TEST(Grps, UpdateIndicator) {
  const Instance s = make_setup(4, 2, 3.0);
  const CoarseSpace coarse = compute_basis(s.op, s.meas, *s.space, 1);
  for (int i : {0, 7, 31}) {
    const Vector phi = coarse.dense(i);
    EXPECT_NEAR(update_indicator(s.op, coarse.bases[i]), quadratic_form(s.op.matrix, phi),
                1e-12 * quadratic_form(s.op.matrix, phi));
  }
}

TEST(Grps, CacheRoundTrip) {
  const Instance s = make_setup(4, 2, 3.0);
  const CoarseSpace coarse = compute_basis(s.op, s.meas, *s.space, 1);
  const auto path = std::filesystem::temp_directory_path() / "quasihom_grps_cache_test.bin";
  save_basis_cache(path, coarse, 11, 22);
  const auto loaded = load_basis_cache(path, 11, 22, coarse.size(), 1);
  ASSERT_TRUE(loaded.has_value());
  for (int i = 0; i < coarse.size(); ++i) {
    EXPECT_EQ(loaded->bases[i].dofs, coarse.bases[i].dofs);
    EXPECT_EQ(loaded->bases[i].values, coarse.bases[i].values);
    EXPECT_EQ(loaded->patches[i].constraints, coarse.patches[i].constraints);
  }
  EXPECT_FALSE(load_basis_cache(path, 12, 22, coarse.size(), 1).has_value());
  EXPECT_FALSE(load_basis_cache(path, 11, 23, coarse.size(), 1).has_value());
  EXPECT_FALSE(load_basis_cache(path, 11, 22, coarse.size(), 2).has_value());
  EXPECT_FALSE(load_basis_cache(path.string() + ".missing", 11, 22, coarse.size(), 1).has_value());
  std::filesystem::remove(path);
}
