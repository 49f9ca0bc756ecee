#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace quasihom {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned rectangle [0, lx] x [0, ly].
struct Rectangle {
  double lx = 1.0;
  double ly = 1.0;
};

using Triangle = std::array<int, 3>;

/// Coarse grid a structured mesh was generated from.
struct GridInfo {
  int coarse_nx = 0;
  int coarse_ny = 0;
};

/// Conforming triangulation. Structured meshes (from build_coarse_mesh and
/// refine) number nodes row-major over the (nx+1) x (ny+1) vertex grid and
/// store two counter-clockwise triangles per square, lower (bl, br, tr) then
/// upper (bl, tr, tl). Immutable after construction.
class Mesh {
 public:
  Mesh(Rectangle domain, std::vector<Point> vertices, std::vector<Triangle> triangles,
       std::vector<char> boundary_flags, int level, std::vector<int> parent,
       std::optional<GridInfo> grid);

  const Rectangle& domain() const noexcept { return domain_; }
  const std::vector<Point>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  int num_vertices() const noexcept { return static_cast<int>(vertices_.size()); }
  int num_triangles() const noexcept { return static_cast<int>(triangles_.size()); }

  bool is_boundary(int vertex) const { return boundary_flags_[vertex] != 0; }
  /// Sorted indices of vertices on the domain (or patch) boundary.
  const std::vector<int>& boundary_nodes() const noexcept { return boundary_nodes_; }

  int level() const noexcept { return level_; }
  /// Level-0 (coarse) ancestor of a triangle; the identity at level 0.
  int parent(int triangle) const { return parent_.empty() ? triangle : parent_[triangle]; }
  const std::optional<GridInfo>& grid() const noexcept { return grid_; }
  bool structured() const noexcept { return grid_.has_value(); }
  int num_coarse_triangles() const;

  /// Squares per direction at this level; structured meshes only.
  int nx() const;
  int ny() const;

  double area(int triangle) const;
  Point barycenter(int triangle) const;

 private:
  Rectangle domain_;
  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<char> boundary_flags_;
  std::vector<int> boundary_nodes_;
  int level_ = 0;
  std::vector<int> parent_;
  std::optional<GridInfo> grid_;
};

Mesh build_coarse_mesh(int nc_x, int nc_y, double lx, double ly);

/// Uniform red refinement applied `times` times; every child keeps its
/// level-0 ancestor in parent().
Mesh refine(const Mesh& mesh, int times);

/// l-layer element patch around coarse triangle `center`: layer 0 is the
/// triangle itself and each layer adds every coarse triangle sharing at least
/// a vertex with the previous one.
struct Patch {
  int center = 0;
  int layers = 0;
  std::vector<int> elements;             // coarse triangles, sorted
  std::vector<int> fine_elements;        // triangles of `mesh` descending from them, sorted
  std::vector<int> interior_fine_nodes;  // nodes strictly inside the patch and off the domain boundary
};

Patch build_patch(const Mesh& mesh, int center, int layers);

struct Submesh {
  Mesh mesh;
  std::vector<int> node_map;     // submesh node -> mesh node
  std::vector<int> element_map;  // submesh triangle -> mesh triangle
};

/// Copies the patch's fine elements into a standalone mesh whose boundary is
/// the patch boundary plus any domain boundary it touches.
Submesh extract_submesh(const Mesh& mesh, const Patch& patch);

/// Stable hash of geometry and connectivity.
std::uint64_t mesh_fingerprint(const Mesh& mesh);

/// Debug dump: "v x y" lines then "t a b c" lines.
void write_mesh_text(const Mesh& mesh, std::ostream& out);

}  // namespace quasihom
