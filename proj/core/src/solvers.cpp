#include "quasihom/solvers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>

#include "quasihom/error.hpp"

namespace quasihom {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class Enum, std::size_t N>
Enum parse_enum(const std::string& name, const std::pair<const char*, Enum> (&table)[N], const char* what) {
  for (const auto& [key, value] : table) {
    if (name == key) return value;
  }
  fail(ErrorCode::kConfigError, std::string("unknown ") + what + " '" + name + "'");
}

constexpr std::pair<const char*, Method> kMethods[] = {
    {"gd", Method::kGd}, {"pgd", Method::kPgd}, {"newton", Method::kNewton}, {"quasinorm", Method::kQuasinorm}};
constexpr std::pair<const char*, SpaceKind> kSpaces[] = {{"fine", SpaceKind::kFine}, {"coarse", SpaceKind::kCoarse}};
constexpr std::pair<const char*, LineSearchKind> kLineSearches[] = {{"none", LineSearchKind::kNone},
                                                                    {"plain", LineSearchKind::kPlain},
                                                                    {"residual_regularized",
                                                                     LineSearchKind::kResidualRegularized}};

template <class Enum, std::size_t N>
const char* enum_name(Enum value, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [key, v] : table) {
    if (v == value) return key;
  }
  return "?";
}

}  // namespace

const char* to_string(Method method) { return enum_name(method, kMethods); }
const char* to_string(SpaceKind space) { return enum_name(space, kSpaces); }
const char* to_string(LineSearchKind kind) { return enum_name(kind, kLineSearches); }
Method parse_method(const std::string& name) { return parse_enum(name, kMethods, "method"); }
SpaceKind parse_space(const std::string& name) { return parse_enum(name, kSpaces, "space"); }
LineSearchKind parse_line_search(const std::string& name) { return parse_enum(name, kLineSearches, "line search"); }

const char* to_string(Termination reason) {
  switch (reason) {
    case Termination::kConverged: return "converged";
    case Termination::kStationary: return "stationary";
    case Termination::kMaxIterations: return "max_iterations";
    case Termination::kEnergyIncrease: return "energy_increase";
    case Termination::kLineSearchFailure: return "line_search_failure";
  }
  return "?";
}

OperatorMode operator_mode(Method method) {
  switch (method) {
    case Method::kGd: return OperatorMode::kGd;
    case Method::kNewton: return OperatorMode::kNewton;
    case Method::kPgd:
    case Method::kQuasinorm: return OperatorMode::kPgd;
  }
  return OperatorMode::kPgd;
}

void SolverConfig::validate() const {
  const auto check = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kConfigError, what);
  };
  check(tol > 0.0, "solver.tol must be positive");
  check(max_iters >= 1, "solver.max_iters must be >= 1");
  check(delta > 0.5 && delta < 1.0, "solver.delta must lie in (0.5, 1)");
  check(update_threshold >= 0.0, "solver.update_threshold must be >= 0");
  check(inner_tol > 0.0, "solver.inner_tol must be positive");
  check(inner_max_iters >= 1, "solver.inner_max_iters must be >= 1");
  check(layers >= 0 || layers == kGlobalLayers, "solver.layers must be >= 0 or global");
  check(cq > 0.0, "solver.cq must be positive");
  check(alpha_max > 0.0, "solver.alpha_max must be positive");
  check(!(method == Method::kQuasinorm && space == SpaceKind::kCoarse),
        "the quasi-norm direction is only defined on the fine space");
}

Vector search_direction(const Problem& problem, const FemState& u, Method method, const SolveOptions& options) {
  if (method == Method::kQuasinorm) {
    fail(ErrorCode::kInvalidArgument, "search_direction does not handle the quasi-norm method");
  }
  const LinearizedOperator a = assemble_linearized(problem, u, operator_mode(method));
  return SpdSolver(a.matrix, options).solve(Vector(-residual(problem, u)));
}

double rho_indicator(double energy_new, double energy_old, double slope, double alpha) {
  return (energy_new - energy_old) / (alpha * slope);
}

namespace {

constexpr double kGolden = 0.6180339887498949;  // (sqrt(5) - 1) / 2
constexpr double kRelativeWidth = 1e-6;
constexpr int kMaxHalvings = 60;
constexpr double kStepRootTol = 1e-12;
constexpr int kMaxRootIters = 100;

// Bracketing plus golden section for min F on [0, alpha_max], F(0) = f0.
// Returns the best evaluated point.
double minimize_step(const std::function<double(double)>& objective, double f0, double alpha_max) {
  double best_alpha = 0.0;
  double best_value = f0;
  const auto eval = [&](double alpha) {
    const double value = objective(alpha);
    if (value < best_value) {
      best_value = value;
      best_alpha = alpha;
    }
    return value;
  };

  double lo = 0.0;
  double hi = 0.0;
  double b = std::min(1.0, alpha_max);
  double fb = eval(b);
  if (fb < f0) {
    bool bracketed = false;
    while (b < alpha_max) {
      const double c = std::min(2.0 * b, alpha_max);
      const double fc = eval(c);
      if (!(fc < fb)) {
        hi = c;
        bracketed = true;
        break;
      }
      lo = b;
      b = c;
      fb = fc;
    }
    if (!bracketed) return best_alpha;
  } else {
    int halvings = 0;
    while (!(fb < f0) && halvings++ < kMaxHalvings) {
      b *= 0.5;
      fb = eval(b);
    }
    if (!(fb < f0)) fail(ErrorCode::kLineSearchFailure, "no step decreases the objective");
    hi = 2.0 * b;
  }

  double c = hi - kGolden * (hi - lo);
  double d = lo + kGolden * (hi - lo);
  double fc = eval(c);
  double fd = eval(d);
  while (hi - lo > kRelativeWidth * 0.5 * (hi + lo)) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kGolden * (hi - lo);
      fc = eval(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kGolden * (hi - lo);
      fd = eval(d);
    }
  }
  return best_alpha;
}

}  // namespace

QuasinormDirection quasinorm_direction(const Problem& problem, const FemState& u, const SolverConfig& cfg) {
  const FemSpace& space = *problem.space;
  const Vector r = residual(problem, u);
  QuasinormDirection out;
  out.w = Vector::Zero(space.num_dofs());
  if (r.squaredNorm() == 0.0) {
    out.converged = true;
    return out;
  }
  const Vector rhs = -r / cfg.cq;

  // The direction equation is the optimality condition of the convex
  // potential Q(w) = cq sum area kappa psi_a(|grad w|) + r.w with
  // psi_a'(s) = s phi''(a+s), a = |grad u|. The frozen-coefficient solve
  // gives a descent direction for Q; taken undamped it oscillates when the
  // weights grow with |grad w| (p > 2), so the step length is the root of
  // the directional derivative of Q, which is monotone.
  const int num_elements = space.num_elements();
  std::vector<Gradient> grad_w(num_elements, Gradient::Zero());
  const auto derivative = [&](const std::vector<Gradient>& grad_d, const Vector& d, double theta) {
    double sum = 0.0;
    for (int t = 0; t < num_elements; ++t) {
      const Gradient v = grad_w[t] + theta * grad_d[t];
      sum += space.element(t).area * problem.kappa[t] * problem.nf.eval(u.grad_norm(t) + v.norm()).ddphi *
             v.dot(grad_d[t]);
    }
    return cfg.cq * sum + r.dot(d);
  };

  for (int k = 1; k <= cfg.inner_max_iters; ++k) {
    const SparseMatrix a = space.assemble([&](int t) {
      const double weight = problem.nf.eval(u.grad_norm(t) + grad_w[t].norm()).ddphi;
      return FemSpace::ElementWeights{problem.kappa[t] * weight};
    });
    const Vector d = SpdSolver(a, cfg.linear).solve(rhs) - out.w;
    const std::vector<Gradient> grad_d = element_gradients(space, d);
    const double g0 = derivative(grad_d, d, 0.0);
    double theta = 1.0;
    if (g0 < 0.0) {
      const double eps = kStepRootTol * -g0;
      double g = derivative(grad_d, d, theta);
      if (std::abs(g) > eps) {
        double lo = 0.0;
        double glo = g0;
        double hi = theta;
        double ghi = g;
        while (ghi < 0.0 && hi < cfg.alpha_max) {
          lo = hi;
          glo = ghi;
          hi = std::min(2.0 * hi, cfg.alpha_max);
          ghi = derivative(grad_d, d, hi);
        }
        theta = hi;
        if (ghi > 0.0) {
          // Illinois regula falsi on the sign change.
          int side = 0;
          for (int it = 0; it < kMaxRootIters && hi - lo > kStepRootTol * hi; ++it) {
            theta = (lo * ghi - hi * glo) / (ghi - glo);
            g = derivative(grad_d, d, theta);
            if (std::abs(g) <= eps) break;
            if (g < 0.0) {
              lo = theta;
              glo = g;
              if (side == -1) ghi *= 0.5;
              side = -1;
            } else {
              hi = theta;
              ghi = g;
              if (side == 1) glo *= 0.5;
              side = 1;
            }
          }
        }
      }
    }
    const Vector step = theta * d;
    const double change = std::sqrt(std::max(0.0, quadratic_form(a, step)));
    out.w += step;
    const double size = std::sqrt(std::max(0.0, quadratic_form(a, out.w)));
    out.iterations = k;
    grad_w = element_gradients(space, out.w);
    if (change <= cfg.inner_tol * size) {
      out.converged = true;
      break;
    }
  }
  return out;
}

LineSearchResult line_search(const Problem& problem, const FemState& u, const Vector& w, bool regularized,
                             const SpdSolver& mass, double alpha_max) {
  const Vector r = residual(problem, u);
  const double slope = r.dot(w);
  if (!(slope < 0.0)) fail(ErrorCode::kNoDescent, "search direction is not a descent direction");

  FemState trial(u.space_ptr(), u.u());
  const auto move = [&](double alpha) { trial.set(u.u() + alpha * w); };
  const auto e = [&](double alpha) {
    move(alpha);
    return energy(problem, trial);
  };
  const auto res = [&](double alpha) {
    move(alpha);
    const double norm = residual_l2h_norm(residual(problem, trial), mass);
    return norm * norm;
  };
  const double e0 = energy(problem, u);

  LineSearchResult out;
  double alpha = 0.0;
  if (regularized) {
    constexpr double h = 1e-6;
    const double de = (e(h) - e(-h)) / (2.0 * h);
    const double dr = (res(h) - res(-h)) / (2.0 * h);
    // With R'(0) >= 0 the balanced penalty cancels the first-order energy
    // decrease and alpha = 0 becomes stationary; take the plain step instead.
    if (dr < 0.0) {
      const double lambda = std::abs(de) / std::abs(dr);
      const double r0 = res(0.0);
      try {
        alpha = minimize_step([&](double a) { return e(a) + lambda * res(a); }, e0 + lambda * r0, alpha_max);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kLineSearchFailure) throw;
        alpha = 0.0;
      }
      if (alpha > 0.0 && e(alpha) < e0) {
        out.regularized = true;
        out.lambda = lambda;
      }
    }
  }
  if (!out.regularized) alpha = minimize_step(e, e0, alpha_max);
  out.alpha = alpha;
  out.energy = e(alpha);
  out.rho = rho_indicator(out.energy, e0, slope, alpha);
  return out;
}

double estimate_cn(const Problem& problem, const FemState& u, const Vector& w0, OperatorMode mode) {
  if (w0.squaredNorm() == 0.0) fail(ErrorCode::kInvalidArgument, "estimate_cn needs a nonzero direction");
  const FemSpace& space = *problem.space;
  const double a_ww = quadratic_form(assemble_linearized(problem, u, mode).matrix, w0);
  const std::vector<Gradient> grad_w = element_gradients(space, w0);
  const auto gap = [&](double c) {
    double rhs = 0.0;
    for (int t = 0; t < space.num_elements(); ++t) {
      const double gw = grad_w[t].norm();
      if (gw == 0.0) continue;
      rhs += space.element(t).area * problem.kappa[t] * problem.nf.eval(u.grad_norm(t) + gw / c).ddphi * gw * gw;
    }
    return c * a_ww - rhs;
  };
  double lo = 1e-6;
  double hi = 1e12;
  if (!(gap(lo) < 0.0) || !(gap(hi) > 0.0)) fail(ErrorCode::kBracketingFailure, "C_n root not in [1e-6, 1e12]");
  while (hi / lo - 1.0 > 1e-8) {
    const double mid = std::sqrt(lo * hi);
    if (gap(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

Vector initial_guess(const Problem& problem, const SolveOptions& options) {
  return solve_spd(assemble_stiffness(*problem.space, problem.kappa), problem.load, options);
}

CoarseLevel make_coarse_level(const Mesh& coarse_mesh, const FemSpace& fine) {
  return {coarse_mesh, build_measurements(coarse_mesh, fine)};
}

namespace {

CoarseSpace build_or_load_basis(const Problem& problem, const FemState& state, const LinearizedOperator& a,
                                const CoarseLevel& coarse, const SolverConfig& cfg) {
  const FemSpace& space = *problem.space;
  if (cfg.basis_cache.empty()) return compute_basis(a, coarse.meas, space, cfg.layers, cfg.linear);
  const std::uint64_t op_id = operator_fingerprint(problem, state, a.mode);
  char name[96];
  std::snprintf(name, sizeof name, "basis_%016llx_%016llx_%d.bin", static_cast<unsigned long long>(space.mesh_id()),
                static_cast<unsigned long long>(op_id), cfg.layers);
  const std::filesystem::path path = cfg.basis_cache / name;
  if (auto cached = load_basis_cache(path, space.mesh_id(), op_id, coarse.meas.num_coarse(), cfg.layers)) {
    return std::move(*cached);
  }
  CoarseSpace built = compute_basis(a, coarse.meas, space, cfg.layers, cfg.linear);
  std::filesystem::create_directories(cfg.basis_cache);
  save_basis_cache(path, built, space.mesh_id(), op_id);
  return built;
}

}  // namespace

SolveReport solve(const Problem& problem, const Vector& u0, const SolverConfig& cfg, const CoarseLevel* coarse,
                  std::optional<double> reference_energy) {
  cfg.validate();
  const bool coarse_mode = cfg.space == SpaceKind::kCoarse;
  if (coarse_mode && coarse == nullptr) fail(ErrorCode::kConfigError, "coarse space requested without a coarse mesh");
  const FemSpace& space = *problem.space;
  if (u0.size() != space.num_dofs()) fail(ErrorCode::kDimensionMismatch, "initial guess size");

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  const SpdSolver mass(assemble_mass(space), {.tol = 1e-12});
  const OperatorMode mode = operator_mode(cfg.method);

  FemState state(problem.space, u0);
  double j = energy(problem, state);
  const auto error_of = [&](double value) { return reference_energy ? value - *reference_energy : kNaN; };

  SolveReport report;
  {
    IterationRecord first;
    first.energy = j;
    first.energy_error = error_of(j);
    first.residual_l2h = residual_l2h_norm(residual(problem, state), mass);
    first.alpha = first.rho = first.lambda = first.c_tilde = kNaN;
    first.wall_time = elapsed();
    report.records.push_back(first);
  }

  std::optional<CoarseSpace> basis;
  Vector previous_u;
  bool regularizing = cfg.line_search == LineSearchKind::kResidualRegularized;
  report.reason = Termination::kMaxIterations;

  for (int n = 0; n < cfg.max_iters; ++n) {
    const Vector r = residual(problem, state);
    Vector w;
    int updated = 0;
    if (coarse_mode) {
      const LinearizedOperator a = assemble_linearized(problem, state, mode);
      if (n == 0 || !cfg.sparse_update) {
        basis = build_or_load_basis(problem, state, a, *coarse, cfg);
        updated = basis->size();
      } else {
        const FemState increment(problem.space, state.u() - previous_u);
        const LinearizedOperator a_incr = assemble_linearized(problem, increment, mode);
        std::vector<int> which;
        for (int i = 0; i < basis->size(); ++i) {
          if (update_indicator(a_incr, basis->bases[i]) >= cfg.update_threshold) which.push_back(i);
        }
        update_basis(*basis, a, coarse->meas, which, cfg.linear);
        updated = static_cast<int>(which.size());
      }
      report.coarse_size = basis->size();
      if (n >= 1) {
        report.bases_rebuilt += updated;
        report.bases_offered += basis->size();
      }
      w = coarse_solve(a, Vector(-r), *basis).w;
    } else if (cfg.method == Method::kQuasinorm) {
      QuasinormDirection qd = quasinorm_direction(problem, state, cfg);
      if (!qd.converged) ++report.inner_unconverged;
      w = std::move(qd.w);
    } else {
      w = search_direction(problem, state, cfg.method, cfg.linear);
    }

    const double slope = r.dot(w);
    // Below this the first-order energy change is lost in rounding of J.
    const double stationary_slope = 1e-12 * std::max(std::abs(j), std::numeric_limits<double>::min());
    if (!(slope < 0.0) || std::abs(slope) <= stationary_slope) {
      report.converged = std::abs(slope) <= stationary_slope;
      report.reason = report.converged ? Termination::kStationary : Termination::kLineSearchFailure;
      if (!report.converged) report.message = "direction is not a descent direction";
      break;
    }

    double c_tilde = kNaN;
    if (cfg.estimate_cn) {
      const Vector w0 = (coarse_mode || cfg.method == Method::kQuasinorm)
                            ? search_direction(problem, state, cfg.method == Method::kQuasinorm ? Method::kPgd : cfg.method,
                                               cfg.linear)
                            : w;
      c_tilde = estimate_cn(problem, state, w0, mode);
    }

    LineSearchResult step;
    try {
      if (cfg.line_search == LineSearchKind::kNone) {
        FemState trial(problem.space, state.u() + w);
        step.alpha = 1.0;
        step.energy = energy(problem, trial);
        step.rho = rho_indicator(step.energy, j, slope, 1.0);
      } else {
        step = line_search(problem, state, w, regularizing, mass, cfg.alpha_max);
        if (regularizing && step.rho <= cfg.delta) {
          regularizing = false;
          report.regularization_off_at = n;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kLineSearchFailure) throw;
      report.converged = std::abs(slope) <= 1e-10 * std::abs(j);
      report.reason = report.converged ? Termination::kStationary : Termination::kLineSearchFailure;
      report.message = e.what();
      break;
    }

    previous_u = state.u();
    state.set(state.u() + step.alpha * w);
    const double j_new = energy(problem, state);

    IterationRecord rec;
    rec.n = n + 1;
    rec.energy = j_new;
    rec.energy_error = error_of(j_new);
    rec.residual_l2h = residual_l2h_norm(residual(problem, state), mass);
    rec.alpha = step.alpha;
    rec.rho = step.rho;
    rec.lambda = step.regularized ? step.lambda : kNaN;
    rec.c_tilde = c_tilde;
    rec.bases_updated = updated;
    rec.wall_time = elapsed();
    report.records.push_back(rec);

    if (!std::isfinite(j_new) || j_new > j) {
      report.reason = Termination::kEnergyIncrease;
      report.message = std::isfinite(j_new) ? "energy increased" : "energy diverged";
      break;
    }
    if ((j - j_new) / std::abs(j) < cfg.tol) {
      report.converged = true;
      report.reason = Termination::kConverged;
      break;
    }
    j = j_new;
  }
  report.u = state.u();
  return report;
}

}  // namespace quasihom
