#include "experiments.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

#include "quasihom/error.hpp"
#include "quasihom/parallel.hpp"

namespace quasihom::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Runs job(i) for i in [0, count) on at most `jobs` threads; the first
/// exception is rethrown after all threads finish.
template <class Job>
void run_jobs(int jobs, int count, Job&& job) {
  const int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex error_mutex;
  const auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

SolverConfig solver_config(const RunConfig& config, int nc_x) {
  SolverConfig cfg = config.solver;
  cfg.layers = resolve_layers(config, nc_x);
  if (const char* cache = std::getenv("QUASIHOM_CACHE"); cache != nullptr && *cache != '\0') cfg.basis_cache = cache;
  return cfg;
}

Vector initial_state(const RunConfig& config, const Problem& problem, const SolverConfig& cfg) {
  const bool zero = config.zero_initial_guess.value_or(config.experiment == Experiment::kHomogenizationError);
  if (zero) return Vector::Zero(problem.space->num_dofs());
  return initial_guess(problem, cfg.linear);
}

SolveReport run_solver(const RunConfig& config, const Instance& instance, const SolverConfig& cfg,
                       std::optional<double> reference) {
  const Vector u0 = initial_state(config, instance.problem, cfg);
  if (cfg.space == SpaceKind::kCoarse) {
    const CoarseLevel level = make_coarse_level(instance.coarse, *instance.space);
    return solve(instance.problem, u0, cfg, &level, reference);
  }
  return solve(instance.problem, u0, cfg, nullptr, reference);
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void stamp(ResultTable& table, const RunConfig& config) {
  table.metadata.emplace_back("experiment", to_string(config.experiment));
  table.metadata.emplace_back("config_fingerprint", fmt::format("{:016x}", config.fingerprint()));
  table.metadata.emplace_back("timestamp", timestamp());
  for (const auto& [key, value] : config.entries()) table.metadata.emplace_back(key, value);
}

/// Copy of `table` with nonpositive entries of `columns` blanked, for log
/// plots of errors that reach exact zero.
ResultTable positive_only(ResultTable table, const std::vector<std::string>& columns) {
  for (const auto& name : columns) {
    const int c = table.column(name);
    for (auto& row : table.rows) {
      if (!(row[c] > 0.0)) row[c] = kNaN;
    }
  }
  return table;
}

/// Writes the figure unless every selected value is missing (or zero on a
/// log axis), e.g. errors of a run that starts at the reference.
void plot(const ResultTable& table, const PlotSpec& spec, const std::filesystem::path& path, std::ostream& log) {
  const ResultTable shown = spec.log_y ? positive_only(table, spec.y) : table;
  bool any = false;
  for (const auto& y : spec.y) {
    const int c = shown.column(y);
    for (const auto& row : shown.rows) any = any || std::isfinite(row[c]);
  }
  if (!any) {
    fmt::print(log, "nothing to plot, skipping {}\n", path.filename().string());
    return;
  }
  emit_svg(shown, spec, path);
}

double relative(double value, double scale) { return scale > 0.0 ? value / scale : kNaN; }

double h1_norm(const FemSpace& space, const Vector& u) {
  return error_norms(space, u, Vector::Zero(u.size()), 2.0).h1;
}

void log_run(std::ostream& log, const std::string& label, const SolveReport& report) {
  const auto& last = report.records.back();
  fmt::print(log, "{}: {} after {} iterations, J = {:.12g}", label, to_string(report.reason), report.records.size() - 1,
             last.energy);
  if (!std::isnan(last.energy_error)) fmt::print(log, ", energy error {:.3e}", last.energy_error);
  if (!report.message.empty()) fmt::print(log, " ({})", report.message);
  fmt::print(log, "\n");
}

int run_solve(const RunConfig& config, const CoefficientField& field, std::ostream& log) {
  const ProblemSpec& spec = config.problem;
  const Instance instance = make_instance(spec, field, spec.nc_x, spec.nc_y, spec.levels);
  const SolverConfig cfg = solver_config(config, spec.nc_x);
  std::optional<double> reference_energy;
  Vector reference_u;
  if (config.reference) {
    const SolveReport ref = reference_solve(instance.problem, cfg.linear);
    reference_energy = ref.records.back().energy;
    reference_u = ref.u;
  }
  const SolveReport report = run_solver(config, instance, cfg, reference_energy);
  log_run(log, "solve", report);

  ResultTable iterations = iteration_table(report);
  stamp(iterations, config);
  write_csv(iterations, config.out / "iterations.csv");

  ResultTable summary({"converged", "termination", "iterations", "energy", "energy_error", "h1_error", "h1_rel_error",
                       "w1p_error", "coarse_size", "update_fraction", "regularization_off_at", "inner_unconverged"});
  double h1 = kNaN;
  double h1_rel = kNaN;
  double w1p = kNaN;
  if (config.reference) {
    const ErrorNorms e = error_norms(*instance.space, report.u, reference_u, spec.p);
    h1 = e.h1;
    w1p = e.w1p;
    h1_rel = relative(e.h1, h1_norm(*instance.space, reference_u));
  }
  summary.add_row({report.converged ? 1.0 : 0.0, static_cast<double>(report.reason),
                   static_cast<double>(report.records.size() - 1), report.records.back().energy,
                   report.records.back().energy_error, h1, h1_rel, w1p, static_cast<double>(report.coarse_size),
                   report.update_fraction(), static_cast<double>(report.regularization_off_at),
                   static_cast<double>(report.inner_unconverged)});
  stamp(summary, config);
  write_csv(summary, config.out / "summary.csv");

  const std::string y = config.reference ? "energy_error" : "residual_l2h";
  plot(iterations,
       {.title = "solve", .x = "n", .y = {y}, .x_label = "iteration n", .y_label = y, .log_y = true},
       config.out / (y + ".svg"), log);

  const bool failed = report.reason == Termination::kEnergyIncrease || report.reason == Termination::kLineSearchFailure;
  return failed ? kExitSolver : 0;
}

int run_compare_methods(const RunConfig& config, const CoefficientField& field, std::ostream& log) {
  const ProblemSpec& spec = config.problem;
  const Instance instance = make_instance(spec, field, spec.nc_x, spec.nc_y, spec.levels);
  const SolverConfig base = solver_config(config, spec.nc_x);
  const SolveReport ref = reference_solve(instance.problem, base.linear);
  const double reference_energy = ref.records.back().energy;

  const int count = static_cast<int>(config.study.methods.size());
  std::vector<SolveReport> reports(count);
  run_jobs(config.jobs, count, [&](int i) {
    SolverConfig cfg = base;
    cfg.method = config.study.methods[i];
    reports[i] = run_solver(config, instance, cfg, reference_energy);
  });

  std::vector<std::string> columns{"n"};
  std::size_t rows = 0;
  for (int i = 0; i < count; ++i) {
    const std::string name = to_string(config.study.methods[i]);
    log_run(log, name, reports[i]);
    ResultTable iterations = iteration_table(reports[i]);
    stamp(iterations, config);
    write_csv(iterations, config.out / "runs" / name / "iterations.csv");
    columns.push_back(name);
    rows = std::max(rows, reports[i].records.size());
  }
  ResultTable comparison(columns);
  for (std::size_t n = 0; n < rows; ++n) {
    std::vector<double> row{static_cast<double>(n)};
    for (const auto& report : reports) row.push_back(n < report.records.size() ? report.records[n].energy_error : kNaN);
    comparison.add_row(std::move(row));
  }
  stamp(comparison, config);
  write_csv(comparison, config.out / "comparison.csv");
  plot(comparison,
           {.title = fmt::format("energy error, p = {:g}", spec.p),
            .x = "n",
            .y = {columns.begin() + 1, columns.end()},
            .x_label = "iteration n",
            .y_label = "J(u_n) - J(u_ref)",
            .log_y = true},
           config.out / "energy_error.svg", log);
  return 0;
}

int run_homogenization_error(const RunConfig& config, const CoefficientField& field, std::ostream& log) {
  const ProblemSpec& spec = config.problem;
  const auto& counts = config.study.coarse_counts;
  const int count = static_cast<int>(counts.size());
  struct Row {
    SolveReport report;
    ErrorNorms errors;
    double reference_h1 = 0.0;
    int layers = 0;
  };
  std::vector<Row> rows(count);
  run_jobs(config.jobs, count, [&](int i) {
    const int nc = counts[i];
    const int nc_y = std::max(1, nc * spec.nc_y / spec.nc_x);
    const int levels = config.study.fine_exponent - static_cast<int>(std::lround(std::log2(nc)));
    const Instance instance = make_instance(spec, field, nc, nc_y, levels);
    SolverConfig cfg = solver_config(config, nc);
    cfg.space = SpaceKind::kCoarse;
    const SolveReport ref = reference_solve(instance.problem, cfg.linear);
    rows[i].report = run_solver(config, instance, cfg, ref.records.back().energy);
    rows[i].errors = error_norms(*instance.space, rows[i].report.u, ref.u, spec.p);
    rows[i].reference_h1 = h1_norm(*instance.space, ref.u);
    rows[i].layers = cfg.layers;
    ResultTable iterations = iteration_table(rows[i].report);
    stamp(iterations, config);
    write_csv(iterations, config.out / "runs" / fmt::format("nc{}", nc) / "iterations.csv");
  });

  ResultTable summary(
      {"H", "nc", "layers", "iterations", "converged", "energy_error", "h1_error", "h1_rel_error", "w1p_error"});
  for (int i = 0; i < count; ++i) {
    const Row& r = rows[i];
    log_run(log, fmt::format("H = {}/{}", spec.lx, counts[i]), r.report);
    summary.add_row({spec.lx / counts[i], static_cast<double>(counts[i]), static_cast<double>(r.layers),
                     static_cast<double>(r.report.records.size() - 1), r.report.converged ? 1.0 : 0.0,
                     r.report.records.back().energy_error, r.errors.h1, relative(r.errors.h1, r.reference_h1),
                     r.errors.w1p});
  }
  stamp(summary, config);
  write_csv(summary, config.out / "summary.csv");
  plot(summary,
           {.title = "homogenization error",
            .x = "H",
            .y = {"energy_error", "h1_error", "w1p_error"},
            .x_label = "coarse mesh size H",
            .y_label = "error",
            .log_x = true,
            .log_y = true},
           config.out / "homogenization_error.svg", log);
  return 0;
}

int run_regularization_study(const RunConfig& config, const CoefficientField& field, std::ostream& log) {
  const ProblemSpec& spec = config.problem;
  const Instance unregularized = [&] {
    ProblemSpec power = spec;
    power.nfunc_kind = NFunctionKind::kPower;
    return make_instance(power, field, spec.nc_x, spec.nc_y, spec.levels);
  }();
  const SolverConfig base = solver_config(config, spec.nc_x);
  const SolveReport ref = reference_solve(unregularized.problem, base.linear);
  const double reference_energy = ref.records.back().energy;

  const auto& eps = config.study.eps_minus_pows;
  const int count = static_cast<int>(eps.size());
  std::vector<SolveReport> reports(count);
  std::vector<double> power_energy(count);
  run_jobs(config.jobs, count, [&](int i) {
    ProblemSpec regularized = spec;
    regularized.eps_minus_pow = eps[i];
    const Instance instance = make_instance(regularized, field, spec.nc_x, spec.nc_y, spec.levels);
    // Energy errors against the regularized problem's own minimizer.
    const SolveReport own = reference_solve(instance.problem, base.linear);
    reports[i] = run_solver(config, instance, base, own.records.back().energy);
    power_energy[i] = energy(unregularized.problem, FemState(unregularized.space, reports[i].u));
    ResultTable iterations = iteration_table(reports[i]);
    stamp(iterations, config);
    write_csv(iterations, config.out / "runs" / fmt::format("eps{:g}", eps[i]) / "iterations.csv");
  });

  ResultTable summary({"eps_minus_pow", "energy", "energy_gap", "power_energy", "h1_error", "iterations", "converged"});
  for (int i = 0; i < count; ++i) {
    log_run(log, fmt::format("eps_minus^(p-2) = {:g}", eps[i]), reports[i]);
    const double j_eps = reports[i].records.back().energy;
    summary.add_row({eps[i], j_eps, std::abs(reference_energy - j_eps), power_energy[i],
                     error_norms(*unregularized.space, reports[i].u, ref.u, 2.0).h1,
                     static_cast<double>(reports[i].records.size() - 1), reports[i].converged ? 1.0 : 0.0});
  }
  summary.metadata.emplace_back("reference_energy", fmt::format("{:.17g}", reference_energy));
  stamp(summary, config);
  write_csv(summary, config.out / "summary.csv");
  plot(summary,
           {.title = fmt::format("regularization error, p = {:g}", spec.p),
            .x = "eps_minus_pow",
            .y = {"energy_gap", "h1_error"},
            .x_label = "eps_minus^(p-2)",
            .y_label = "error",
            .log_x = true,
            .log_y = true},
           config.out / "regularization_error.svg", log);
  return 0;
}

int run_sparse_update_study(const RunConfig& config, const CoefficientField& field, std::ostream& log) {
  const ProblemSpec& spec = config.problem;
  const Instance instance = make_instance(spec, field, spec.nc_x, spec.nc_y, spec.levels);
  SolverConfig base = solver_config(config, spec.nc_x);
  base.space = SpaceKind::kCoarse;
  base.sparse_update = true;
  const SolveReport ref = reference_solve(instance.problem, base.linear);
  const double reference_energy = ref.records.back().energy;
  const double reference_h1 = h1_norm(*instance.space, ref.u);

  const auto& thresholds = config.study.thresholds;
  const int count = static_cast<int>(thresholds.size());
  std::vector<SolveReport> reports(count);
  run_jobs(config.jobs, count, [&](int i) {
    SolverConfig cfg = base;
    cfg.update_threshold = thresholds[i];
    reports[i] = run_solver(config, instance, cfg, reference_energy);
    ResultTable iterations = iteration_table(reports[i]);
    stamp(iterations, config);
    write_csv(iterations, config.out / "runs" / fmt::format("threshold{:g}", thresholds[i]) / "iterations.csv");
  });

  ResultTable summary({"threshold", "update_fraction", "bases_rebuilt", "h1_error", "h1_rel_error", "w1p_error",
                       "energy_error", "iterations", "converged"});
  for (int i = 0; i < count; ++i) {
    log_run(log, fmt::format("delta_I = {:g}", thresholds[i]), reports[i]);
    const ErrorNorms e = error_norms(*instance.space, reports[i].u, ref.u, spec.p);
    summary.add_row({thresholds[i], reports[i].update_fraction(), static_cast<double>(reports[i].bases_rebuilt), e.h1,
                     relative(e.h1, reference_h1), e.w1p, reports[i].records.back().energy_error,
                     static_cast<double>(reports[i].records.size() - 1), reports[i].converged ? 1.0 : 0.0});
  }
  stamp(summary, config);
  write_csv(summary, config.out / "summary.csv");
  plot(summary,
           {.title = "sparse updating",
            .x = "threshold",
            .y = {"update_fraction", "h1_rel_error"},
            .x_label = "delta_I",
            .y_label = "fraction / relative H1 error"},
           config.out / "sparse_update.svg", log);
  return 0;
}

}  // namespace

int exit_code_for(const Error& error) {
  return error.code() == ErrorCode::kConfigError ? kExitConfig : kExitSolver;
}

CoefficientField make_field(const ProblemSpec& spec) {
  const Extent extent{0.0, 0.0, spec.lx, spec.ly};
  switch (spec.coeff.kind) {
    case CoefficientKind::kMstrig:
      return CoefficientField::mstrig();
    case CoefficientKind::kConstant:
      return CoefficientField::constant(spec.coeff.value);
    case CoefficientKind::kChannels:
      // rows/cols of 0 select a 32 x 32 grid.
      return synth_channels(spec.coeff.rows > 0 ? spec.coeff.rows : 32, spec.coeff.cols > 0 ? spec.coeff.cols : 32,
                            spec.coeff.channels, spec.coeff.contrast, spec.coeff.seed, extent);
    case CoefficientKind::kGrid:
      try {
        return load_grid(spec.coeff.path, spec.coeff.rows, spec.coeff.cols, extent);
      } catch (const Error& e) {
        throw Failure(kExitData, fmt::format("{}: {}", spec.coeff.path.string(), e.what()));
      }
  }
  fail(ErrorCode::kConfigError, "unknown coefficient kind");
}

Instance make_instance(const ProblemSpec& spec, const CoefficientField& field, int nc_x, int nc_y, int levels) {
  Mesh coarse = build_coarse_mesh(nc_x, nc_y, spec.lx, spec.ly);
  auto space = std::make_shared<const FemSpace>(refine(coarse, levels));
  ElementCoefficients kappa = sample_on_mesh(field, space->mesh());
  Problem problem = make_problem(space, std::move(kappa), spec.nfunction(), spec.source_function());
  return {std::move(coarse), std::move(space), std::move(problem)};
}

SolveReport reference_solve(const Problem& problem, const SolveOptions& linear) {
  SolverConfig cfg;
  cfg.method = Method::kNewton;
  cfg.space = SpaceKind::kFine;
  cfg.line_search = LineSearchKind::kPlain;
  cfg.tol = 1e-15;
  cfg.max_iters = 200;
  cfg.linear = linear;
  return solve(problem, initial_guess(problem, linear), cfg);
}

ResultTable iteration_table(const SolveReport& report) {
  ResultTable table({"n", "energy", "energy_error", "residual_l2h", "alpha", "rho", "lambda", "c_tilde", "bases_updated",
                     "wall_time"});
  for (const auto& r : report.records) {
    table.add_row({static_cast<double>(r.n), r.energy, r.energy_error, r.residual_l2h, r.alpha, r.rho, r.lambda, r.c_tilde,
                   static_cast<double>(r.bases_updated), r.wall_time});
  }
  return table;
}

int run(const RunConfig& config, std::ostream& log) {
  config.validate();
  const CoefficientField field = make_field(config.problem);
  if (config.jobs > 1) set_worker_count(1);
  switch (config.experiment) {
    case Experiment::kSolve: return run_solve(config, field, log);
    case Experiment::kCompareMethods: return run_compare_methods(config, field, log);
    case Experiment::kHomogenizationError: return run_homogenization_error(config, field, log);
    case Experiment::kRegularizationStudy: return run_regularization_study(config, field, log);
    case Experiment::kSparseUpdateStudy: return run_sparse_update_study(config, field, log);
  }
  return kExitConfig;
}

}  // namespace quasihom::cli
