#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "config.hpp"
#include "quasihom/error.hpp"
#include "quasihom/solvers.hpp"
#include "table.hpp"

namespace quasihom::cli {

inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitSolver = 4;

/// Error carrying the process exit status it maps to.
class Failure : public std::runtime_error {
 public:
  Failure(int exit_code, const std::string& what) : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Library errors map to config (2) or solver (4) failures; data-file errors
/// are converted to Failure(3) where the file is read.
int exit_code_for(const Error& error);

/// Coefficient field of the problem; grid files are loaded here.
CoefficientField make_field(const ProblemSpec& spec);

struct Instance {
  Mesh coarse;
  std::shared_ptr<const FemSpace> space;
  Problem problem;
};

Instance make_instance(const ProblemSpec& spec, const CoefficientField& field, int nc_x, int nc_y, int levels);

/// Fine Newton solve to 1e-15 with the plain line search, from the Poisson
/// initial guess: the energy reference of every experiment.
SolveReport reference_solve(const Problem& problem, const SolveOptions& linear = {});

/// Columns: n, energy, energy_error, residual_l2h, alpha, rho, lambda,
/// c_tilde, bases_updated, wall_time.
ResultTable iteration_table(const SolveReport& report);

/// Runs the configured experiment, writing artifacts under config.out.
/// Returns the exit status (0, or 4 if a single solve failed to converge
/// for a solver reason); throws on errors.
int run(const RunConfig& config, std::ostream& log);

}  // namespace quasihom::cli
