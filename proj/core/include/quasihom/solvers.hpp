#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "quasihom/fem.hpp"
#include "quasihom/grps.hpp"
#include "quasihom/sparse.hpp"

namespace quasihom {

enum class Method { kGd, kPgd, kNewton, kQuasinorm };
enum class SpaceKind { kFine, kCoarse };
enum class LineSearchKind { kNone, kPlain, kResidualRegularized };

const char* to_string(Method method);
const char* to_string(SpaceKind space);
const char* to_string(LineSearchKind kind);
Method parse_method(const std::string& name);
SpaceKind parse_space(const std::string& name);
LineSearchKind parse_line_search(const std::string& name);

/// Linearized operator behind a method; quasinorm maps to PGD (its fixed
/// point is assembled separately).
OperatorMode operator_mode(Method method);

struct SolverConfig {
  Method method = Method::kNewton;
  SpaceKind space = SpaceKind::kFine;
  double tol = 1e-15;  // relative energy decrease that stops the iteration
  int max_iters = 100;
  LineSearchKind line_search = LineSearchKind::kPlain;
  double delta = 0.68;          // rho threshold that switches the regularization off
  bool sparse_update = false;   // use the basis-update indicator for n >= 1
  double update_threshold = 0.0;
  double inner_tol = 1e-10;     // quasi-norm fixed point
  int inner_max_iters = 100;
  int layers = kGlobalLayers;
  double cq = 2.0;
  bool estimate_cn = false;
  double alpha_max = 4.0;
  SolveOptions linear;
  /// Directory for the initial coarse basis; empty disables caching.
  std::filesystem::path basis_cache;

  /// Throws config-error on out-of-range values or unsupported combinations.
  void validate() const;
};

/// Solves A[u] w = -J'(u) on the fine space, A chosen by the method
/// (quasinorm uses quasinorm_direction instead).
Vector search_direction(const Problem& problem, const FemState& u, Method method, const SolveOptions& options = {});

struct QuasinormDirection {
  Vector w;
  int iterations = 0;
  bool converged = false;
};

/// Frozen-coefficient fixed point for
///   cq * int kappa phi''(|grad u| + |grad w|) grad w . grad v = -J'(u)(v).
QuasinormDirection quasinorm_direction(const Problem& problem, const FemState& u, const SolverConfig& cfg);

struct LineSearchResult {
  double alpha = 0.0;
  double rho = 0.0;
  double lambda = 0.0;        // 0 unless regularized
  double energy = 0.0;        // J(u + alpha w)
  bool regularized = false;   // false also when the regularized step fell back to the plain one
};

/// Minimizes J(u + a w) (plus lambda ||J'(u + a w)||^2_{L_h^2} when
/// `regularized`) over a in [0, alpha_max] by step doubling/halving and
/// golden-section search. `mass` is the factored free-node mass matrix.
LineSearchResult line_search(const Problem& problem, const FemState& u, const Vector& w, bool regularized,
                             const SpdSolver& mass, double alpha_max = 4.0);

/// Actual over predicted decrease, (J(u + a w) - J(u)) / (a J'(u)w): near 1
/// while the step stays in the linear regime, 1/2 at the minimizer of a
/// quadratic.
double rho_indicator(double energy_new, double energy_old, double slope, double alpha);

/// Root C of C A[u](w0, w0) = int kappa phi''(|grad u| + |grad w0| / C) |grad w0|^2.
double estimate_cn(const Problem& problem, const FemState& u, const Vector& w0, OperatorMode mode);

/// Solution of the kappa-weighted linear Poisson problem.
Vector initial_guess(const Problem& problem, const SolveOptions& options = {});

struct CoarseLevel {
  Mesh mesh;
  MeasurementSet meas;
};

CoarseLevel make_coarse_level(const Mesh& coarse_mesh, const FemSpace& fine);

struct IterationRecord {
  int n = 0;
  double energy = 0.0;
  double energy_error = 0.0;  // NaN without a reference energy
  double residual_l2h = 0.0;
  double alpha = 0.0;         // alpha_{n-1}, the step that produced this iterate; NaN at n = 0
  double rho = 0.0;
  double lambda = 0.0;
  double c_tilde = 0.0;       // estimate at u^{(n-1)}; NaN if not requested
  int bases_updated = 0;
  double wall_time = 0.0;     // seconds since the solve started
};

enum class Termination { kConverged, kStationary, kMaxIterations, kEnergyIncrease, kLineSearchFailure };

const char* to_string(Termination reason);

struct SolveReport {
  std::vector<IterationRecord> records;
  Vector u;
  bool converged = false;
  Termination reason = Termination::kMaxIterations;
  std::string message;
  int coarse_size = 0;
  int bases_rebuilt = 0;   // over iterations n >= 1
  int bases_offered = 0;   // coarse_size times the number of iterations n >= 1
  int regularization_off_at = -1;  // iteration at which rho first fell below delta
  int inner_unconverged = 0;       // quasi-norm directions that hit the inner cap

  double update_fraction() const {
    return bases_offered > 0 ? static_cast<double>(bases_rebuilt) / bases_offered : 1.0;
  }
};

/// Fine-space iteration or iterated numerical homogenization, depending on
/// cfg.space (`coarse` is required for the latter).
SolveReport solve(const Problem& problem, const Vector& u0, const SolverConfig& cfg,
                  const CoarseLevel* coarse = nullptr, std::optional<double> reference_energy = std::nullopt);

}  // namespace quasihom
