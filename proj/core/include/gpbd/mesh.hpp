#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpbd/types.hpp"

namespace gpbd {

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hinge stencil: (e0, e1, v_left, v_right), where (e0, e1) is the shared edge
// with e0 < e1 and v_left belongs to the lower-indexed triangle.
struct Hinge {
  std::array<int, 4> v;
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Hinge> hinges;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
};

struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
};

// Rest-state precompute backing deformation gradients.
struct TriRest {
  Mat2 dm_inv;       // inverse rest-shape matrix in the local 2D frame
  double area = 0.0; // m^2
};

struct TetRest {
  Mat3 dm_inv;
  double volume = 0.0; // m^3
};

TriRest tri_rest_state(const Vec3& x0, const Vec3& x1, const Vec3& x2);
TetRest tet_rest_state(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                       const Vec3& x3);

double triangle_area(const Vec3& x0, const Vec3& x1, const Vec3& x2);
double tet_signed_volume(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                         const Vec3& x3);

// Derives hinges from all interior edges (shared by exactly two triangles),
// sorted by the shared-edge vertex pair. Throws on edges shared by >2 faces.
std::vector<Hinge> build_hinges(const std::vector<std::array<int, 3>>& tris,
                                int num_vertices);

// OBJ with triangular faces only ('v' and 'f' records, 1-based indices).
TriMesh load_tri_mesh(std::istream& in);
TriMesh load_tri_mesh_file(const std::string& path);

// Plain-text node/ele tet format (see docs/formats.md).
TetMesh load_tet_mesh(std::istream& node, std::istream& ele);
TetMesh load_tet_mesh_files(const std::string& node_path,
                            const std::string& ele_path);

// Row-major vertex grid in the y=0 plane with alternating diagonals.
TriMesh generate_grid_cloth(int nx, int ny, double spacing);

// (n+1)^3 vertices, 6 tets per hex cell, consistent splitting pattern.
TetMesh generate_cube_tets(int n, double edge);

struct Coloring {
  std::vector<int> color;                      // per element
  std::vector<std::vector<int>> classes;       // elements per color

  int num_colors() const { return static_cast<int>(classes.size()); }
};

// Greedy first-fit over elements in index order on the dual graph
// (elements sharing at least one vertex).
Coloring color_elements(const std::vector<std::vector<int>>& stencils);

} // namespace gpbd
