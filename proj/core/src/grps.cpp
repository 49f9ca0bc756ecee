#include "quasihom/grps.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "quasihom/error.hpp"
#include "quasihom/parallel.hpp"

namespace quasihom {

MeasurementSet build_measurements(const Mesh& coarse, const FemSpace& fine) {
  const Mesh& mesh = fine.mesh();
  const bool same_grid = coarse.structured() && mesh.structured() && coarse.level() == 0 &&
                         coarse.grid()->coarse_nx == mesh.grid()->coarse_nx &&
                         coarse.grid()->coarse_ny == mesh.grid()->coarse_ny &&
                         coarse.domain().lx == mesh.domain().lx && coarse.domain().ly == mesh.domain().ly;
  if (!same_grid) fail(ErrorCode::kMeshMismatch, "fine mesh is not a refinement of the coarse mesh");

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(3 * static_cast<std::size_t>(fine.num_elements()));
  for (int t = 0; t < fine.num_elements(); ++t) {
    const ElementGeometry& e = fine.element(t);
    for (int dof : e.dofs) {
      if (dof >= 0) entries.emplace_back(mesh.parent(t), dof, e.area / 3.0);
    }
  }
  MeasurementSet meas;
  meas.matrix.resize(coarse.num_triangles(), fine.num_dofs());
  meas.matrix.setFromTriplets(entries.begin(), entries.end());
  meas.matrix.makeCompressed();
  return meas;
}

int default_layers(double h_coarse) {
  if (!(h_coarse > 0.0)) fail(ErrorCode::kInvalidArgument, "coarse mesh size must be positive");
  // Guard against log2(1/H) landing a hair above an integer.
  const int log_layers = static_cast<int>(std::ceil(std::log2(1.0 / h_coarse) - 1e-12));
  return std::max(2, log_layers);
}

Vector CoarseSpace::dense(int i) const {
  Vector v = Vector::Zero(num_dofs);
  const SparseBasis& b = bases[i];
  for (std::size_t k = 0; k < b.dofs.size(); ++k) v[b.dofs[k]] = b.values[k];
  return v;
}

SparseMatrix CoarseSpace::basis_matrix() const {
  std::vector<Eigen::Triplet<double>> entries;
  for (int i = 0; i < size(); ++i) {
    const SparseBasis& b = bases[i];
    for (std::size_t k = 0; k < b.dofs.size(); ++k) entries.emplace_back(i, b.dofs[k], b.values[k]);
  }
  SparseMatrix r(size(), num_dofs);
  r.setFromTriplets(entries.begin(), entries.end());
  r.makeCompressed();
  return r;
}

namespace {

std::vector<PatchDofs> patch_dofs(const FemSpace& space, int m, int layers) {
  std::vector<PatchDofs> patches(m);
  if (layers == kGlobalLayers) {
    std::vector<int> all(space.num_dofs());
    for (int j = 0; j < space.num_dofs(); ++j) all[j] = j;
    std::vector<int> every(m);
    for (int j = 0; j < m; ++j) every[j] = j;
    for (auto& p : patches) p = {all, every};
    return patches;
  }
  parallel_for(m, [&](std::size_t i) {
    const Patch patch = build_patch(space.mesh(), static_cast<int>(i), layers);
    PatchDofs& out = patches[i];
    out.constraints = patch.elements;
    out.interior.reserve(patch.interior_fine_nodes.size());
    for (int v : patch.interior_fine_nodes) out.interior.push_back(space.dof(v));
  });
  return patches;
}

SparseBasis local_basis(const SparseMatrix& a, const MeasurementSet& meas, const PatchDofs& patch, int i,
                        const SolveOptions& options) {
  const auto pos = std::lower_bound(patch.constraints.begin(), patch.constraints.end(), i);
  const SparseMatrix a_loc = restrict_matrix(a, patch.interior);
  const SparseMatrix b_loc = submatrix(meas.matrix, patch.constraints, patch.interior);
  Vector g = Vector::Zero(static_cast<Eigen::Index>(patch.constraints.size()));
  g[pos - patch.constraints.begin()] = 1.0;
  try {
    return {patch.interior, SaddleSolver(a_loc, b_loc, options).solve_homogeneous(g)};
  } catch (const Error& e) {
    fail(e.code(), "basis " + std::to_string(i) + ": " + e.what());
  }
}

void compute_selected(CoarseSpace& coarse, const LinearizedOperator& a, const MeasurementSet& meas,
                      std::span<const int> which, const SolveOptions& options) {
  if (which.empty()) return;
  if (coarse.layers == kGlobalLayers) {
    const SaddleSolver solver(a.matrix, meas.matrix, options);
    const PatchDofs& patch = coarse.patches.front();
    parallel_for(which.size(), [&](std::size_t k) {
      const int i = which[k];
      Vector g = Vector::Zero(coarse.size());
      g[i] = 1.0;
      coarse.bases[i] = {patch.interior, solver.solve_homogeneous(g)};
    });
  } else {
    parallel_for(which.size(), [&](std::size_t k) {
      const int i = which[k];
      coarse.bases[i] = local_basis(a.matrix, meas, coarse.patches[i], i, options);
    });
  }
  for (int i : which) coarse.built_from[i] = a.built_at;
}

}  // namespace

CoarseSpace compute_basis(const LinearizedOperator& a, const MeasurementSet& meas, const FemSpace& space,
                          int layers, SolveOptions options) {
  if (meas.matrix.cols() != space.num_dofs() || a.matrix.rows() != space.num_dofs()) {
    fail(ErrorCode::kDimensionMismatch, "operator, measurements and space disagree on the dof count");
  }
  if (layers < 0 && layers != kGlobalLayers) fail(ErrorCode::kInvalidArgument, "layers must be >= 0");
  const int m = meas.num_coarse();
  CoarseSpace coarse;
  coarse.num_dofs = space.num_dofs();
  coarse.layers = layers;
  coarse.bases.resize(m);
  coarse.built_from.assign(m, 0);
  coarse.stale.assign(m, 0);
  coarse.patches = patch_dofs(space, m, layers);
  std::vector<int> all(m);
  for (int i = 0; i < m; ++i) all[i] = i;
  compute_selected(coarse, a, meas, all, options);
  return coarse;
}

void update_basis(CoarseSpace& coarse, const LinearizedOperator& a, const MeasurementSet& meas,
                  std::span<const int> which, SolveOptions options) {
  for (int i : which) {
    if (i < 0 || i >= coarse.size()) fail(ErrorCode::kIndexOutOfRange, "basis " + std::to_string(i));
  }
  compute_selected(coarse, a, meas, which, options);
  for (int i = 0; i < coarse.size(); ++i) coarse.stale[i] = coarse.built_from[i] != a.built_at;
}

Vector interpolate(const Vector& w, const CoarseSpace& coarse, const MeasurementSet& meas) {
  if (w.size() != coarse.num_dofs || meas.num_coarse() != coarse.size()) {
    fail(ErrorCode::kDimensionMismatch, "interpolate operands");
  }
  const Vector weights = meas.matrix * w;
  Vector out = Vector::Zero(coarse.num_dofs);
  for (int i = 0; i < coarse.size(); ++i) {
    const SparseBasis& b = coarse.bases[i];
    for (std::size_t k = 0; k < b.dofs.size(); ++k) out[b.dofs[k]] += weights[i] * b.values[k];
  }
  return out;
}

CoarseSolution coarse_solve(const LinearizedOperator& a, const Vector& rhs, const CoarseSpace& coarse) {
  if (rhs.size() != coarse.num_dofs || a.matrix.rows() != coarse.num_dofs) {
    fail(ErrorCode::kDimensionMismatch, "coarse_solve operands");
  }
  CoarseSolution out;
  out.mismatched_bases = static_cast<int>(
      std::count_if(coarse.built_from.begin(), coarse.built_from.end(), [&](auto id) { return id != a.built_at; }));
  if (rhs.squaredNorm() == 0.0) {
    out.w = Vector::Zero(coarse.num_dofs);
    return out;
  }
  const SparseMatrix r = coarse.basis_matrix();
  const SparseMatrix ar = a.matrix * SparseMatrix(r.transpose());
  DenseMatrix k = DenseMatrix(r * ar);
  k = 0.5 * (k + k.transpose()).eval();
  const Eigen::LLT<DenseMatrix> llt(k);
  if (llt.info() != Eigen::Success) fail(ErrorCode::kSingularMatrix, "coarse stiffness is not positive definite");
  const Vector c = llt.solve(Vector(r * rhs));
  out.w = r.transpose() * c;
  return out;
}

double update_indicator(const LinearizedOperator& a_incr, const SparseBasis& basis) {
  const SparseMatrix a_loc = restrict_matrix(a_incr.matrix, basis.dofs);
  return basis.values.dot(a_loc * basis.values);
}

namespace {

constexpr char kCacheMagic[8] = {'Q', 'H', 'B', 'A', 'S', 'I', 'S', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void put_span(std::ostream& out, std::span<const T> v) {
  put(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

template <class T>
bool get(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

template <class T>
bool get_vector(std::istream& in, std::vector<T>& v) {
  std::uint64_t n = 0;
  if (!get(in, n) || n > (1ull << 32)) return false;
  v.resize(n);
  return static_cast<bool>(in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))));
}

}  // namespace

void save_basis_cache(const std::filesystem::path& path, const CoarseSpace& coarse, std::uint64_t mesh_id,
                      std::uint64_t operator_id) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(kCacheMagic, sizeof kCacheMagic);
  put(out, mesh_id);
  put(out, operator_id);
  put(out, static_cast<std::int32_t>(coarse.size()));
  put(out, static_cast<std::int32_t>(coarse.layers));
  put(out, static_cast<std::int32_t>(coarse.num_dofs));
  for (int i = 0; i < coarse.size(); ++i) {
    put(out, coarse.built_from[i]);
    put_span(out, std::span<const int>(coarse.patches[i].interior));
    put_span(out, std::span<const int>(coarse.patches[i].constraints));
    put_span(out, std::span<const int>(coarse.bases[i].dofs));
    put_span(out, std::span<const double>(coarse.bases[i].values.data(), coarse.bases[i].values.size()));
  }
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

std::optional<CoarseSpace> load_basis_cache(const std::filesystem::path& path, std::uint64_t mesh_id,
                                            std::uint64_t operator_id, int size, int layers) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof kCacheMagic];
  std::uint64_t file_mesh = 0;
  std::uint64_t file_op = 0;
  std::int32_t file_size = 0;
  std::int32_t file_layers = 0;
  std::int32_t num_dofs = 0;
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kCacheMagic)) return std::nullopt;
  if (!get(in, file_mesh) || !get(in, file_op) || !get(in, file_size) || !get(in, file_layers) ||
      !get(in, num_dofs)) {
    return std::nullopt;
  }
  if (file_mesh != mesh_id || file_op != operator_id || file_size != size || file_layers != layers) {
    return std::nullopt;
  }
  CoarseSpace coarse;
  coarse.num_dofs = num_dofs;
  coarse.layers = layers;
  coarse.bases.resize(size);
  coarse.built_from.resize(size);
  coarse.stale.assign(size, 0);
  coarse.patches.resize(size);
  for (int i = 0; i < size; ++i) {
    std::vector<double> values;
    if (!get(in, coarse.built_from[i]) || !get_vector(in, coarse.patches[i].interior) ||
        !get_vector(in, coarse.patches[i].constraints) || !get_vector(in, coarse.bases[i].dofs) ||
        !get_vector(in, values) || values.size() != coarse.bases[i].dofs.size()) {
      return std::nullopt;
    }
    coarse.bases[i].values = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  return coarse;
}

}  // namespace quasihom
