#include "quasihom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "quasihom/error.hpp"
#include "quasihom/hash.hpp"

namespace quasihom {

Mesh::Mesh(Rectangle domain, std::vector<Point> vertices, std::vector<Triangle> triangles,
           std::vector<char> boundary_flags, int level, std::vector<int> parent,
           std::optional<GridInfo> grid)
    : domain_(domain),
      vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      boundary_flags_(std::move(boundary_flags)),
      level_(level),
      parent_(std::move(parent)),
      grid_(grid) {
  if (boundary_flags_.size() != vertices_.size()) {
    fail(ErrorCode::kDimensionMismatch, "boundary flags do not match vertex count");
  }
  if (!parent_.empty() && parent_.size() != triangles_.size()) {
    fail(ErrorCode::kDimensionMismatch, "parent map does not match triangle count");
  }
  for (int v = 0; v < num_vertices(); ++v) {
    if (boundary_flags_[v]) boundary_nodes_.push_back(v);
  }
}

int Mesh::num_coarse_triangles() const {
  if (grid_) return 2 * grid_->coarse_nx * grid_->coarse_ny;
  if (parent_.empty()) return num_triangles();
  return *std::max_element(parent_.begin(), parent_.end()) + 1;
}

int Mesh::nx() const {
  if (!grid_) fail(ErrorCode::kInvalidArgument, "nx() on an unstructured mesh");
  return grid_->coarse_nx << level_;
}

int Mesh::ny() const {
  if (!grid_) fail(ErrorCode::kInvalidArgument, "ny() on an unstructured mesh");
  return grid_->coarse_ny << level_;
}

double Mesh::area(int t) const {
  const auto& [a, b, c] = triangles_[t];
  const Point& p = vertices_[a];
  const Point& q = vertices_[b];
  const Point& r = vertices_[c];
  return 0.5 * ((q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y));
}

Point Mesh::barycenter(int t) const {
  const auto& [a, b, c] = triangles_[t];
  return {(vertices_[a].x + vertices_[b].x + vertices_[c].x) / 3.0,
          (vertices_[a].y + vertices_[b].y + vertices_[c].y) / 3.0};
}

namespace {

// Structured grid of nx x ny squares over `domain` at refinement `level`
// relative to a coarse_nx x coarse_ny grid.
Mesh structured_mesh(Rectangle domain, int coarse_nx, int coarse_ny, int level) {
  const int nx = coarse_nx << level;
  const int ny = coarse_ny << level;
  const int stride = nx + 1;
  std::vector<Point> vertices;
  std::vector<char> boundary;
  vertices.reserve(static_cast<std::size_t>(stride) * (ny + 1));
  boundary.reserve(vertices.capacity());
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // Exact endpoints so the far corner is (lx, ly) bit-for-bit.
      const double x = (i == nx) ? domain.lx : domain.lx * i / nx;
      const double y = (j == ny) ? domain.ly : domain.ly * j / ny;
      vertices.push_back({x, y});
      boundary.push_back(i == 0 || j == 0 || i == nx || j == ny);
    }
  }

  std::vector<Triangle> triangles;
  std::vector<int> parent;
  triangles.reserve(2 * static_cast<std::size_t>(nx) * ny);
  if (level > 0) parent.reserve(triangles.capacity());
  const int block = 1 << level;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int bl = j * stride + i;
      const int br = bl + 1;
      const int tl = bl + stride;
      const int tr = tl + 1;
      triangles.push_back({bl, br, tr});
      triangles.push_back({bl, tr, tl});
      if (level > 0) {
        const int coarse_square = (j / block) * coarse_nx + (i / block);
        const int a = i % block;
        const int b = j % block;
        // Fine squares strictly below the coarse diagonal belong to the lower
        // coarse triangle, strictly above to the upper one; squares on the
        // diagonal split the same way the coarse square does.
        const int lower_parent = 2 * coarse_square + (a >= b ? 0 : 1);
        const int upper_parent = 2 * coarse_square + (a > b ? 0 : 1);
        parent.push_back(lower_parent);
        parent.push_back(upper_parent);
      }
    }
  }
  return Mesh(domain, std::move(vertices), std::move(triangles), std::move(boundary), level,
              std::move(parent), GridInfo{coarse_nx, coarse_ny});
}

}  // namespace

Mesh build_coarse_mesh(int nc_x, int nc_y, double lx, double ly) {
  if (nc_x < 1 || nc_y < 1) fail(ErrorCode::kInvalidArgument, "coarse grid counts must be >= 1");
  if (!(lx > 0.0) || !(ly > 0.0)) fail(ErrorCode::kInvalidArgument, "domain lengths must be positive");
  return structured_mesh({lx, ly}, nc_x, nc_y, 0);
}

Mesh refine(const Mesh& mesh, int times) {
  if (times < 0) fail(ErrorCode::kInvalidArgument, "refinement count must be >= 0");
  if (!mesh.structured()) fail(ErrorCode::kInvalidArgument, "refine requires a structured mesh");
  if (times == 0) return mesh;
  const GridInfo grid = *mesh.grid();
  return structured_mesh(mesh.domain(), grid.coarse_nx, grid.coarse_ny, mesh.level() + times);
}

Patch build_patch(const Mesh& mesh, int center, int layers) {
  if (!mesh.structured()) fail(ErrorCode::kInvalidArgument, "patches require a structured mesh");
  const int n_coarse = mesh.num_coarse_triangles();
  if (center < 0 || center >= n_coarse) {
    fail(ErrorCode::kIndexOutOfRange, "coarse element " + std::to_string(center));
  }
  if (layers < 0) fail(ErrorCode::kInvalidArgument, "layers must be >= 0");

  const Mesh coarse = build_coarse_mesh(mesh.grid()->coarse_nx, mesh.grid()->coarse_ny,
                                        mesh.domain().lx, mesh.domain().ly);
  std::vector<std::vector<int>> vertex_elements(coarse.num_vertices());
  for (int t = 0; t < n_coarse; ++t) {
    for (int v : coarse.triangles()[t]) vertex_elements[v].push_back(t);
  }

  std::vector<char> in_patch(n_coarse, 0);
  in_patch[center] = 1;
  for (int layer = 0; layer < layers; ++layer) {
    std::vector<char> touched(coarse.num_vertices(), 0);
    for (int t = 0; t < n_coarse; ++t) {
      if (!in_patch[t]) continue;
      for (int v : coarse.triangles()[t]) touched[v] = 1;
    }
    bool grew = false;
    for (int v = 0; v < coarse.num_vertices(); ++v) {
      if (!touched[v]) continue;
      for (int t : vertex_elements[v]) {
        if (!in_patch[t]) {
          in_patch[t] = 1;
          grew = true;
        }
      }
    }
    if (!grew) break;
  }

  Patch patch;
  patch.center = center;
  patch.layers = layers;
  for (int t = 0; t < n_coarse; ++t) {
    if (in_patch[t]) patch.elements.push_back(t);
  }

  std::vector<int> incident_total(mesh.num_vertices(), 0);
  std::vector<int> incident_patch(mesh.num_vertices(), 0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const bool inside = in_patch[mesh.parent(t)] != 0;
    if (inside) patch.fine_elements.push_back(t);
    for (int v : mesh.triangles()[t]) {
      ++incident_total[v];
      if (inside) ++incident_patch[v];
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (incident_patch[v] > 0 && incident_patch[v] == incident_total[v] && !mesh.is_boundary(v)) {
      patch.interior_fine_nodes.push_back(v);
    }
  }
  return patch;
}

Submesh extract_submesh(const Mesh& mesh, const Patch& patch) {
  std::vector<char> used(mesh.num_vertices(), 0);
  for (int t : patch.fine_elements) {
    for (int v : mesh.triangles()[t]) used[v] = 1;
  }
  std::vector<char> interior(mesh.num_vertices(), 0);
  for (int v : patch.interior_fine_nodes) interior[v] = 1;

  std::vector<int> local(mesh.num_vertices(), -1);
  std::vector<int> node_map;
  std::vector<Point> vertices;
  std::vector<char> boundary;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (!used[v]) continue;
    local[v] = static_cast<int>(node_map.size());
    node_map.push_back(v);
    vertices.push_back(mesh.vertices()[v]);
    boundary.push_back(interior[v] ? 0 : 1);
  }

  std::vector<Triangle> triangles;
  std::vector<int> parent;
  triangles.reserve(patch.fine_elements.size());
  for (int t : patch.fine_elements) {
    const auto& tri = mesh.triangles()[t];
    triangles.push_back({local[tri[0]], local[tri[1]], local[tri[2]]});
    parent.push_back(mesh.parent(t));
  }
  Mesh sub(mesh.domain(), std::move(vertices), std::move(triangles), std::move(boundary), mesh.level(),
           std::move(parent), std::nullopt);
  return {std::move(sub), std::move(node_map), patch.fine_elements};
}

std::uint64_t mesh_fingerprint(const Mesh& mesh) {
  Fnv1a h;
  h.value(mesh.domain().lx);
  h.value(mesh.domain().ly);
  h.value(mesh.level());
  h.values(std::span<const Point>(mesh.vertices()));
  h.values(std::span<const Triangle>(mesh.triangles()));
  return h.digest();
}

void write_mesh_text(const Mesh& mesh, std::ostream& out) {
  const auto precision = out.precision(17);
  for (const Point& p : mesh.vertices()) out << "v " << p.x << ' ' << p.y << '\n';
  for (const Triangle& t : mesh.triangles()) out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out.precision(precision);
}

}  // namespace quasihom
