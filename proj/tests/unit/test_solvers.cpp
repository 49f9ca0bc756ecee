#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "quasihom/error.hpp"
#include "quasihom/solvers.hpp"

using namespace quasihom;

namespace {

Vector random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

Problem make(int nc, int levels, NFunction nf, CoefficientField field = CoefficientField::mstrig()) {
  auto space = std::make_shared<const FemSpace>(refine(build_coarse_mesh(nc, nc, 1.0, 1.0), levels));
  return make_problem(space, sample_on_mesh(field, space->mesh()), nf,
                      [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); });
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

TEST(Solvers, Names) {
  EXPECT_EQ(parse_method("quasinorm"), Method::kQuasinorm);
  EXPECT_STREQ(to_string(Method::kPgd), "pgd");
  EXPECT_EQ(parse_space("coarse"), SpaceKind::kCoarse);
  EXPECT_EQ(parse_line_search("none"), LineSearchKind::kNone);
  EXPECT_THROW(parse_method("bfgs"), Error);
  EXPECT_EQ(operator_mode(Method::kQuasinorm), OperatorMode::kPgd);
}

TEST(Solvers, ConfigValidation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.delta = 0.4;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kConfigError);
  cfg = {};
  cfg.method = Method::kQuasinorm;
  cfg.space = SpaceKind::kCoarse;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kConfigError);
}

TEST(Solvers, DirectionsSolveTheirOperators) {
  const Problem problem = make(4, 1, NFunction::power(4.0));
  const FemState u(problem.space, random_vector(problem.space->num_dofs(), 1));
  const Vector r = residual(problem, u);
  for (Method m : {Method::kGd, Method::kPgd, Method::kNewton}) {
    const DenseMatrix a = DenseMatrix(assemble_linearized(problem, u, operator_mode(m)).matrix);
    const Vector oracle = a.partialPivLu().solve(Vector(-r));
    const Vector w = search_direction(problem, u, m);
    EXPECT_LE((w - oracle).norm(), 1e-10 * oracle.norm()) << to_string(m);
    EXPECT_LT(r.dot(w), 0.0);
  }
}

TEST(Solvers, QuasinormQuadraticIsExact) {
  const Problem problem = make(4, 1, NFunction::power(2.0));
  const FemState u(problem.space, random_vector(problem.space->num_dofs(), 2));
  SolverConfig cfg;
  cfg.method = Method::kQuasinorm;
  const QuasinormDirection d = quasinorm_direction(problem, u, cfg);
  EXPECT_TRUE(d.converged);
  const DenseMatrix k = DenseMatrix(assemble_stiffness(*problem.space, problem.kappa));
  const Vector oracle = (cfg.cq * k).partialPivLu().solve(Vector(-residual(problem, u)));
  EXPECT_LE((d.w - oracle).norm(), 1e-10 * oracle.norm());
}

TEST(Solvers, QuasinormDefect) {
  const Problem problem = make(4, 2, NFunction::power(5.0));
  const FemState u(problem.space, 0.1 * random_vector(problem.space->num_dofs(), 3));
  SolverConfig cfg;
  cfg.method = Method::kQuasinorm;
  const QuasinormDirection d = quasinorm_direction(problem, u, cfg);
  EXPECT_TRUE(d.converged);
  EXPECT_LE(d.iterations, cfg.inner_max_iters);
  const std::vector<Gradient> gw = element_gradients(*problem.space, d.w);
  const SparseMatrix k = problem.space->assemble([&](int t) {
    const double phi2 = problem.nf.eval(u.grad_norm(t) + gw[t].norm()).ddphi;
    return FemSpace::ElementWeights{cfg.cq * problem.kappa[t] * phi2, 0.0, Gradient::Zero()};
  });
  const Vector r = residual(problem, u);
  EXPECT_LE((k * d.w + r).norm(), 1e-8 * r.norm());
}

TEST(Solvers, RhoIndicator) {
  EXPECT_DOUBLE_EQ(rho_indicator(-0.5, 0.0, -1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(rho_indicator(-1.0, 0.0, -2.0, 0.5), 1.0);
}

TEST(Solvers, LineSearchQuadratic) {
  const Problem problem = make(4, 1, NFunction::power(2.0));
  const FemState u(problem.space, random_vector(problem.space->num_dofs(), 4));
  const Vector w = search_direction(problem, u, Method::kNewton);
  const SpdSolver mass(assemble_mass(*problem.space));
  const LineSearchResult ls = line_search(problem, u, w, false, mass);
  EXPECT_NEAR(ls.alpha, 1.0, 1e-6);
  EXPECT_NEAR(ls.rho, 0.5, 1e-6);
  EXPECT_FALSE(ls.regularized);
  EXPECT_NEAR(ls.energy, energy(problem, FemState(problem.space, u.u() + w)), 1e-12);
  const LineSearchResult half = line_search(problem, u, Vector(0.5 * w), false, mass);
  EXPECT_NEAR(half.alpha, 2.0, 2e-6);
  EXPECT_NEAR(half.energy, ls.energy, 1e-12);
}

TEST(Solvers, LineSearchDecreasesNonlinear) {
  const Problem problem = make(4, 1, NFunction::power(5.0));
  const FemState u(problem.space, random_vector(problem.space->num_dofs(), 5));
  const Vector w = search_direction(problem, u, Method::kPgd);
  const SpdSolver mass(assemble_mass(*problem.space));
  for (bool reg : {false, true}) {
    const LineSearchResult ls = line_search(problem, u, w, reg, mass);
    EXPECT_GT(ls.alpha, 0.0);
    EXPECT_LT(ls.energy, energy(problem, u));
    EXPECT_GT(ls.rho, 0.0);
  }
}

TEST(Solvers, EstimateCn) {
  const Problem quad = make(4, 1, NFunction::power(2.0));
  const FemState u2(quad.space, random_vector(quad.space->num_dofs(), 6));
  const Vector w2 = search_direction(quad, u2, Method::kNewton);
  EXPECT_NEAR(estimate_cn(quad, u2, w2, OperatorMode::kNewton), 1.0, 1e-8);

  // phi'' = 2t at p = 3 turns the root equation into A C^2 - S1 C - S2 = 0.
  const Problem cubic = make(4, 1, NFunction::power(3.0));
  const FemState u(cubic.space, random_vector(cubic.space->num_dofs(), 7));
  const Vector w = search_direction(cubic, u, Method::kPgd);
  const double a = quadratic_form(assemble_linearized(cubic, u, OperatorMode::kPgd).matrix, w);
  const std::vector<Gradient> gw = element_gradients(*cubic.space, w);
  double s1 = 0.0;
  double s2 = 0.0;
  for (int t = 0; t < cubic.space->num_elements(); ++t) {
    const double weight = cubic.space->element(t).area * cubic.kappa[t] * 2.0;
    s1 += weight * u.grad_norm(t) * gw[t].squaredNorm();
    s2 += weight * std::pow(gw[t].norm(), 3.0);
  }
  const double oracle = (s1 + std::sqrt(s1 * s1 + 4.0 * a * s2)) / (2.0 * a);
  EXPECT_NEAR(estimate_cn(cubic, u, w, OperatorMode::kPgd), oracle, 1e-7 * oracle);
  EXPECT_THROW(estimate_cn(cubic, u, Vector::Zero(w.size()), OperatorMode::kPgd), Error);
}

TEST(Solvers, InitialGuessIsPoisson) {
  const Problem problem = make(4, 1, NFunction::power(3.0));
  const Vector u0 = initial_guess(problem);
  const DenseMatrix k = DenseMatrix(assemble_stiffness(*problem.space, problem.kappa));
  EXPECT_LE((k * u0 - problem.load).norm(), 1e-10 * problem.load.norm());
}

TEST(Solvers, QuadraticNewtonOneStep) {
  const Problem problem = make(4, 1, NFunction::power(2.0));
  SolverConfig cfg;
  const SolveReport report = solve(problem, Vector::Zero(problem.space->num_dofs()), cfg);
  EXPECT_TRUE(report.converged);
  ASSERT_EQ(report.records.size(), 2u);
  EXPECT_TRUE(std::isnan(report.records[0].alpha));
  EXPECT_NEAR(report.records[1].alpha, 1.0, 1e-6);
  EXPECT_NEAR(report.records[1].rho, 0.5, 1e-6);
  EXPECT_LE((report.u - initial_guess(problem)).norm(), 1e-10 * report.u.norm());
}

TEST(Solvers, EnergyErrorsMonotone) {
  const Problem problem = make(4, 2, NFunction::reg_c1(4.0, 1e-2));
  SolverConfig cfg;
  const SolveReport ref = solve(problem, initial_guess(problem), cfg);
  ASSERT_TRUE(ref.converged);
  const double j_ref = ref.records.back().energy;
  for (Method m : {Method::kPgd, Method::kNewton, Method::kQuasinorm}) {
    cfg.method = m;
    cfg.max_iters = 30;
    const SolveReport report = solve(problem, Vector::Zero(problem.space->num_dofs()), cfg, nullptr, j_ref);
    for (std::size_t n = 1; n < report.records.size(); ++n) {
      EXPECT_LE(report.records[n].energy, report.records[n - 1].energy + 1e-14) << to_string(m) << " " << n;
      EXPECT_GE(report.records[n].energy_error, -1e-12);
    }
    EXPECT_LE(report.records.back().energy_error, 1e-6 * std::abs(j_ref)) << to_string(m);
  }
}

TEST(Solvers, CoarseGlobalQuadraticIsGalerkin) {
  const Mesh coarse_mesh = build_coarse_mesh(2, 2, 1.0, 1.0);
  auto space = std::make_shared<const FemSpace>(refine(coarse_mesh, 2));
  const Problem problem = make_problem(space, sample_on_mesh(CoefficientField::mstrig(), space->mesh()),
                                       NFunction::power(2.0), [](double, double) { return 1.0; });
  const CoarseLevel level = make_coarse_level(coarse_mesh, *space);
  SolverConfig cfg;
  cfg.space = SpaceKind::kCoarse;
  cfg.max_iters = 1;
  cfg.line_search = LineSearchKind::kNone;
  const SolveReport report = solve(problem, Vector::Zero(space->num_dofs()), cfg, &level);
  ASSERT_GE(report.records.size(), 2u);
  EXPECT_EQ(report.coarse_size, 8);
  const FemState zero(space, Vector::Zero(space->num_dofs()));
  const LinearizedOperator op = assemble_linearized(problem, zero, OperatorMode::kNewton);
  const CoarseSpace basis = compute_basis(op, level.meas, *space, kGlobalLayers);
  const Vector galerkin = coarse_solve(op, problem.load, basis).w;
  EXPECT_LE((report.u - galerkin).norm(), 1e-10 * galerkin.norm());
  EXPECT_THROW(solve(problem, Vector::Zero(space->num_dofs()), cfg), Error);
}
