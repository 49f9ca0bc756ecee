#include "quasihom/fem.hpp"

#include <algorithm>
#include <cmath>

#include "quasihom/error.hpp"
#include "quasihom/hash.hpp"
#include "quasihom/parallel.hpp"

namespace quasihom {

FemSpace::FemSpace(Mesh mesh) : mesh_(std::move(mesh)), mesh_id_(mesh_fingerprint(mesh_)) {
  node_dof_.assign(mesh_.num_vertices(), -1);
  for (int v = 0; v < mesh_.num_vertices(); ++v) {
    if (mesh_.is_boundary(v)) continue;
    node_dof_[v] = static_cast<int>(dof_nodes_.size());
    dof_nodes_.push_back(v);
  }

  elements_.resize(mesh_.num_triangles());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(9 * elements_.size());
  for (int t = 0; t < mesh_.num_triangles(); ++t) {
    const auto& tri = mesh_.triangles()[t];
    const Point& a = mesh_.vertices()[tri[0]];
    const Point& b = mesh_.vertices()[tri[1]];
    const Point& c = mesh_.vertices()[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    if (!(det > 0.0)) fail(ErrorCode::kInvalidArgument, "degenerate or clockwise triangle " + std::to_string(t));
    ElementGeometry& e = elements_[t];
    e.area = 0.5 * det;
    e.grad[0] = Gradient(b.y - c.y, c.x - b.x) / det;
    e.grad[1] = Gradient(c.y - a.y, a.x - c.x) / det;
    e.grad[2] = Gradient(a.y - b.y, b.x - a.x) / det;
    for (int k = 0; k < 3; ++k) e.dofs[k] = node_dof_[tri[k]];
    for (int i : e.dofs) {
      if (i < 0) continue;
      for (int j : e.dofs) {
        if (j >= 0) entries.emplace_back(i, j, 1.0);
      }
    }
  }
  pattern_.resize(num_dofs(), num_dofs());
  pattern_.setFromTriplets(entries.begin(), entries.end());
  pattern_.makeCompressed();
  std::fill(pattern_.valuePtr(), pattern_.valuePtr() + pattern_.nonZeros(), 0.0);

  slots_.resize(elements_.size());
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const auto& dofs = elements_[t].dofs;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        int slot = -1;
        if (dofs[i] >= 0 && dofs[j] >= 0) {
          const int* row_begin = inner + outer[dofs[i]];
          const int* row_end = inner + outer[dofs[i] + 1];
          slot = static_cast<int>(std::lower_bound(row_begin, row_end, dofs[j]) - inner);
        }
        slots_[t][3 * i + j] = slot;
      }
    }
  }
}

SparseMatrix FemSpace::assemble(const std::function<ElementWeights(int)>& weights) const {
  std::vector<std::array<double, 9>> local(elements_.size());
  parallel_for(elements_.size(), [&](std::size_t t) {
    const ElementGeometry& e = elements_[t];
    const ElementWeights w = weights(static_cast<int>(t));
    std::array<double, 3> proj{};
    if (w.rank_one != 0.0) {
      for (int i = 0; i < 3; ++i) proj[i] = w.direction.dot(e.grad[i]);
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        local[t][3 * i + j] = e.area * (w.isotropic * e.grad[i].dot(e.grad[j]) + w.rank_one * proj[i] * proj[j]);
      }
    }
  });
  SparseMatrix out = pattern_;
  double* values = out.valuePtr();
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    for (int k = 0; k < 9; ++k) {
      if (slots_[t][k] >= 0) values[slots_[t][k]] += local[t][k];
    }
  }
  return out;
}

Vector FemSpace::restrict_nodal(const Vector& nodal) const {
  if (nodal.size() != mesh_.num_vertices()) fail(ErrorCode::kDimensionMismatch, "nodal vector size");
  Vector u(num_dofs());
  for (int i = 0; i < num_dofs(); ++i) u[i] = nodal[dof_nodes_[i]];
  return u;
}

Vector FemSpace::extend(const Vector& u) const {
  if (u.size() != num_dofs()) fail(ErrorCode::kDimensionMismatch, "dof vector size");
  Vector nodal = Vector::Zero(mesh_.num_vertices());
  for (int i = 0; i < num_dofs(); ++i) nodal[dof_nodes_[i]] = u[i];
  return nodal;
}

std::vector<Gradient> element_gradients(const FemSpace& space, const Vector& u) {
  if (u.size() != space.num_dofs()) fail(ErrorCode::kDimensionMismatch, "dof vector size");
  std::vector<Gradient> grads(space.num_elements());
  for (int t = 0; t < space.num_elements(); ++t) {
    const ElementGeometry& e = space.element(t);
    Gradient g = Gradient::Zero();
    for (int k = 0; k < 3; ++k) {
      if (e.dofs[k] >= 0) g += u[e.dofs[k]] * e.grad[k];
    }
    grads[t] = g;
  }
  return grads;
}

FemState::FemState(std::shared_ptr<const FemSpace> space, Vector u) : space_(std::move(space)) {
  set(std::move(u));
}

void FemState::set(Vector u) {
  grads_ = element_gradients(*space_, u);
  u_ = std::move(u);
}

SparseMatrix assemble_mass_full(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(9 * static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double a = mesh.area(t);
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) entries.emplace_back(tri[i], tri[j], a * (i == j ? 2.0 : 1.0) / 12.0);
    }
  }
  SparseMatrix m(mesh.num_vertices(), mesh.num_vertices());
  m.setFromTriplets(entries.begin(), entries.end());
  m.makeCompressed();
  return m;
}

SparseMatrix assemble_mass(const FemSpace& space) {
  return restrict_matrix(assemble_mass_full(space.mesh()), space.dof_nodes());
}

Vector load_vector(const FemSpace& space, const Source& f) {
  const Mesh& mesh = space.mesh();
  Vector nodal(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) nodal[v] = f(mesh.vertices()[v].x, mesh.vertices()[v].y);
  return space.restrict_nodal(assemble_mass_full(mesh) * nodal);
}

namespace {

void check_kappa(const FemSpace& space, const ElementCoefficients& kappa) {
  if (static_cast<int>(kappa.size()) != space.num_elements()) {
    fail(ErrorCode::kDimensionMismatch, "coefficient count does not match the mesh");
  }
}

void check_state(const Problem& problem, const FemState& state) {
  if (state.space().mesh_id() != problem.space->mesh_id()) {
    fail(ErrorCode::kMeshMismatch, "state lives on a different mesh than the problem");
  }
}

}  // namespace

SparseMatrix assemble_stiffness(const FemSpace& space, const ElementCoefficients& kappa) {
  check_kappa(space, kappa);
  return space.assemble([&](int t) { return FemSpace::ElementWeights{kappa[t]}; });
}

Problem make_problem(std::shared_ptr<const FemSpace> space, ElementCoefficients kappa, NFunction nf,
                     const Source& f) {
  check_kappa(*space, kappa);
  Problem problem{std::move(space), std::move(kappa), nf, {}};
  problem.load = load_vector(*problem.space, f);
  return problem;
}

double energy(const Problem& problem, const FemState& state) {
  check_state(problem, state);
  const FemSpace& space = *problem.space;
  double sum = 0.0;
  for (int t = 0; t < space.num_elements(); ++t) {
    sum += space.element(t).area * problem.kappa[t] * problem.nf.eval(state.grad_norm(t)).phi;
  }
  return sum - problem.load.dot(state.u());
}

Vector residual(const Problem& problem, const FemState& state) {
  check_state(problem, state);
  const FemSpace& space = *problem.space;
  Vector r = -problem.load;
  for (int t = 0; t < space.num_elements(); ++t) {
    const ElementGeometry& e = space.element(t);
    const Gradient& g = state.gradients()[t];
    const double scale = e.area * problem.kappa[t] * problem.nf.secant(g.norm());
    for (int k = 0; k < 3; ++k) {
      if (e.dofs[k] >= 0) r[e.dofs[k]] += scale * g.dot(e.grad[k]);
    }
  }
  return r;
}

const char* to_string(OperatorMode mode) {
  switch (mode) {
    case OperatorMode::kGd: return "gd";
    case OperatorMode::kPgd: return "pgd";
    case OperatorMode::kNewton: return "newton";
  }
  return "?";
}

namespace {

FemSpace::ElementWeights linearized_weights(const Problem& problem, const FemState& state, OperatorMode mode,
                                            int t) {
  if (mode == OperatorMode::kGd) return {1.0};
  const Gradient& g = state.gradients()[t];
  const double norm = g.norm();
  const double kappa = problem.kappa[t];
  FemSpace::ElementWeights w{kappa * problem.nf.secant(norm)};
  if (mode == OperatorMode::kNewton && norm > 0.0) {
    // (phi'' t - phi') / t^3 = (phi'' - phi'/t) / t^2
    const double coeff = (problem.nf.eval(norm).ddphi - problem.nf.secant(norm)) / (norm * norm);
    w.rank_one = kappa * coeff;
    w.direction = g;
  }
  return w;
}

}  // namespace

std::uint64_t operator_fingerprint(const Problem& problem, const FemState& state, OperatorMode mode) {
  check_state(problem, state);
  const int n = problem.space->num_elements();
  std::vector<FemSpace::ElementWeights> weights(n);
  double scale = 0.0;
  for (int t = 0; t < n; ++t) {
    weights[t] = linearized_weights(problem, state, mode, t);
    scale = std::max({scale, std::abs(weights[t].isotropic), std::abs(weights[t].rank_one) * weights[t].direction.squaredNorm()});
  }
  const auto quantize = [&](double x) -> long long {
    return scale > 0.0 ? std::llround(x / scale * 1e12) : 0;
  };
  Fnv1a h;
  h.value(static_cast<int>(mode));
  h.value(static_cast<int>(problem.nf.kind()));
  h.value(problem.nf.p());
  h.value(problem.nf.eps_minus());
  h.value(problem.nf.eps_plus());
  h.value(problem.space->mesh_id());
  for (const auto& w : weights) {
    h.value(quantize(w.isotropic));
    h.value(quantize(w.rank_one * w.direction.x() * w.direction.x()));
    h.value(quantize(w.rank_one * w.direction.x() * w.direction.y()));
    h.value(quantize(w.rank_one * w.direction.y() * w.direction.y()));
  }
  return h.digest();
}

LinearizedOperator assemble_linearized(const Problem& problem, const FemState& state, OperatorMode mode) {
  check_state(problem, state);
  LinearizedOperator op;
  op.mode = mode;
  op.matrix = problem.space->assemble([&](int t) { return linearized_weights(problem, state, mode, t); });
  op.built_at = operator_fingerprint(problem, state, mode);
  return op;
}

double quasi_norm(const Problem& problem, const FemState& u, const FemState& w) {
  check_state(problem, u);
  check_state(problem, w);
  const FemSpace& space = *problem.space;
  double sum = 0.0;
  for (int t = 0; t < space.num_elements(); ++t) {
    const double gw = w.grad_norm(t);
    if (gw == 0.0) continue;
    sum += space.element(t).area * problem.kappa[t] * problem.nf.eval(u.grad_norm(t) + gw).ddphi * gw * gw;
  }
  return sum;
}

double bregman(const Problem& problem, const FemState& u, const FemState& v) {
  return energy(problem, u) - energy(problem, v) - residual(problem, v).dot(u.u() - v.u());
}

double residual_l2h_norm(const Vector& r, const SpdSolver& mass) {
  if (r.squaredNorm() == 0.0) return 0.0;
  return std::sqrt(std::max(0.0, r.dot(mass.solve(r))));
}

double residual_l2h_norm(const Vector& r, const SparseMatrix& mass, double tol) {
  return residual_l2h_norm(r, SpdSolver(mass, {.tol = tol}));
}

ErrorNorms error_norms(const FemSpace& space, const Vector& u, const Vector& v, double p) {
  if (u.size() != v.size()) fail(ErrorCode::kDimensionMismatch, "error_norms operands differ in size");
  if (!(p >= 1.0)) fail(ErrorCode::kInvalidArgument, "error_norms needs p >= 1");
  const std::vector<Gradient> grads = element_gradients(space, u - v);
  double h1 = 0.0;
  double w1p = 0.0;
  for (int t = 0; t < space.num_elements(); ++t) {
    const double area = space.element(t).area;
    const double g = grads[t].norm();
    h1 += area * g * g;
    w1p += area * std::pow(g, p);
  }
  return {std::sqrt(h1), std::pow(w1p, 1.0 / p)};
}

double quadratic_form(const SparseMatrix& a, const Vector& x) { return x.dot(a * x); }

}  // namespace quasihom
