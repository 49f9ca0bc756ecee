#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "quasihom/solvers.hpp"

using namespace quasihom;

namespace {

struct Fixture {
  Mesh coarse;
  std::shared_ptr<const FemSpace> space;
  Problem problem;
  FemState state;
};

Fixture make_fixture(int nc, int levels, double p) {
  Mesh coarse = build_coarse_mesh(nc, nc, 1.0, 1.0);
  auto space = std::make_shared<const FemSpace>(refine(coarse, levels));
  Problem problem = make_problem(space, sample_on_mesh(CoefficientField::mstrig(), space->mesh()),
                                 NFunction::solver_default(p), [](double x, double y) {
                                   return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
                                 });
  FemState state(space, initial_guess(problem));
  return {std::move(coarse), space, std::move(problem), std::move(state)};
}

void BM_AssembleNewton(benchmark::State& st) {
  const Fixture f = make_fixture(8, static_cast<int>(st.range(0)), 5.0);
  for (auto _ : st) benchmark::DoNotOptimize(assemble_linearized(f.problem, f.state, OperatorMode::kNewton));
  st.counters["dofs"] = f.space->num_dofs();
}
BENCHMARK(BM_AssembleNewton)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Residual(benchmark::State& st) {
  const Fixture f = make_fixture(8, static_cast<int>(st.range(0)), 5.0);
  for (auto _ : st) benchmark::DoNotOptimize(residual(f.problem, f.state));
}
BENCHMARK(BM_Residual)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_ComputeBasis(benchmark::State& st) {
  const Fixture f = make_fixture(8, 2, 5.0);
  const LinearizedOperator a = assemble_linearized(f.problem, f.state, OperatorMode::kPgd);
  const MeasurementSet meas = build_measurements(f.coarse, *f.space);
  const int layers = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(compute_basis(a, meas, *f.space, layers < 0 ? kGlobalLayers : layers));
}
BENCHMARK(BM_ComputeBasis)->Arg(1)->Arg(2)->Arg(3)->Arg(-1)->Unit(benchmark::kMillisecond);

void BM_LineSearch(benchmark::State& st) {
  const Fixture f = make_fixture(8, 2, 5.0);
  const Vector w = search_direction(f.problem, f.state, Method::kNewton);
  const SpdSolver mass(assemble_mass(*f.space));
  const bool regularized = st.range(0) != 0;
  for (auto _ : st) benchmark::DoNotOptimize(line_search(f.problem, f.state, w, regularized, mass));
}
BENCHMARK(BM_LineSearch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SpdSolve(benchmark::State& st) {
  const Fixture f = make_fixture(8, static_cast<int>(st.range(0)), 2.0);
  const SparseMatrix k = assemble_stiffness(*f.space, f.problem.kappa);
  const SpdMethod method = st.range(1) == 0 ? SpdMethod::kDirect : SpdMethod::kPcg;
  for (auto _ : st) benchmark::DoNotOptimize(solve_spd(k, f.problem.load, {1e-10, method, 0}));
}
BENCHMARK(BM_SpdSolve)->Args({3, 0})->Args({3, 1})->Args({4, 0})->Args({4, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
