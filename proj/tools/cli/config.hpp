#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "quasihom/coeff.hpp"
#include "quasihom/fem.hpp"
#include "quasihom/nfunc.hpp"
#include "quasihom/solvers.hpp"

namespace quasihom::cli {

enum class Experiment { kSolve, kCompareMethods, kHomogenizationError, kRegularizationStudy, kSparseUpdateStudy };

const char* to_string(Experiment experiment);
Experiment parse_experiment(const std::string& name);

struct CoefficientSpec {
  CoefficientKind kind = CoefficientKind::kMstrig;
  double value = 1.0;  // constant
  std::filesystem::path path;  // grid
  int rows = 0;
  int cols = 0;
  int channels = 3;  // channels
  double contrast = 1e3;
  std::uint64_t seed = 7;
};

struct ProblemSpec {
  double lx = 1.0;
  double ly = 1.0;
  int nc_x = 8;
  int nc_y = 8;
  int levels = 2;
  CoefficientSpec coeff;
  std::string source = "sinpi";  // sinpi, sinbox or constant
  double source_value = 1.0;
  NFunctionKind nfunc_kind = NFunctionKind::kRegC1;
  double p = 2.0;
  double eps_minus_pow = 1e-6;
  double eps_plus = NFunction::kInfinity;

  NFunction nfunction() const;
  Source source_function() const;
};

/// Layer count as configured: an explicit count, "global" or "default"
/// (resolved against the coarse mesh size at run time).
inline constexpr int kDefaultLayers = -2;

struct StudySpec {
  std::vector<Method> methods{Method::kGd, Method::kPgd, Method::kNewton, Method::kQuasinorm};
  std::vector<int> coarse_counts{4, 8, 16};  // homogenization-error, Nc along x
  int fine_exponent = 6;                     // homogenization-error, fine h = Lx 2^-k
  std::vector<double> eps_minus_pows{1e-2, 1e-4, 1e-6};
  std::vector<double> thresholds{0.0, 0.1, 0.2, 0.3};
};

struct RunConfig {
  Experiment experiment = Experiment::kSolve;
  ProblemSpec problem;
  SolverConfig solver;
  int layers = kDefaultLayers;
  /// Start from zero instead of the kappa-Poisson solution. Unset means
  /// zero for homogenization-error (a Poisson start already carries the fine
  /// scales) and Poisson otherwise.
  std::optional<bool> zero_initial_guess;
  bool reference = true;  // compute the fine reference for energy errors
  StudySpec study;
  std::filesystem::path out = "out";
  int jobs = 1;

  /// Sorted key=value view of every setting, used for the fingerprint and the
  /// run metadata.
  std::map<std::string, std::string> entries() const;
  std::uint64_t fingerprint() const;
  /// Config errors on anything the library would reject later.
  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Applies key/value settings in order. Unknown keys and malformed values are
/// config errors.
void apply(RunConfig& config, const std::map<std::string, std::string>& settings);
void apply(RunConfig& config, const std::string& key, const std::string& value);

/// Layer count for a coarse mesh of nc_x squares along x.
int resolve_layers(const RunConfig& config, int nc_x);

}  // namespace quasihom::cli
