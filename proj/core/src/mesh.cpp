#include "gpbd/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace gpbd {

double triangle_area(const Vec3& x0, const Vec3& x1, const Vec3& x2) {
  return 0.5 * (x1 - x0).cross(x2 - x0).norm();
}

double tet_signed_volume(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                         const Vec3& x3) {
  return (x1 - x0).cross(x2 - x0).dot(x3 - x0) / 6.0;
}

TriRest tri_rest_state(const Vec3& x0, const Vec3& x1, const Vec3& x2) {
  const Vec3 e1 = x1 - x0;
  const Vec3 e2 = x2 - x0;
  const double area = triangle_area(x0, x1, x2);
  if (!(area > 0.0)) throw MeshError("degenerate triangle (rest area <= 0)");

  // Local 2D frame: first rest edge defines the x-axis.
  const Vec3 u = e1.normalized();
  const Vec3 n = e1.cross(e2).normalized();
  const Vec3 w = n.cross(u);

  Mat2 dm;
  dm << e1.dot(u), e2.dot(u), e1.dot(w), e2.dot(w);
  TriRest r;
  r.dm_inv = dm.inverse();
  r.area = area;
  return r;
}

TetRest tet_rest_state(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                       const Vec3& x3) {
  Mat3 dm;
  dm.col(0) = x1 - x0;
  dm.col(1) = x2 - x0;
  dm.col(2) = x3 - x0;
  const double vol = dm.determinant() / 6.0;
  if (!(vol > 0.0)) throw MeshError("tet with non-positive rest volume");
  TetRest r;
  r.dm_inv = dm.inverse();
  r.volume = vol;
  return r;
}

std::vector<Hinge> build_hinges(const std::vector<std::array<int, 3>>& tris,
                                int num_vertices) {
  // edge (a<b) -> (triangle index, opposite vertex) in triangle order
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edges;
  for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
    const auto& tri = tris[t];
    for (int e = 0; e < 3; ++e) {
      int a = tri[e], b = tri[(e + 1) % 3], c = tri[(e + 2) % 3];
      if (a < 0 || a >= num_vertices || b < 0 || b >= num_vertices)
        throw MeshError("triangle " + std::to_string(t) +
                        ": vertex index out of range");
      if (a > b) std::swap(a, b);
      auto& uses = edges[{a, b}];
      uses.emplace_back(t, c);
      if (uses.size() > 2)
        throw MeshError("non-manifold edge (" + std::to_string(a) + "," +
                        std::to_string(b) + ") shared by >2 faces");
    }
  }
  std::vector<Hinge> hinges;
  for (const auto& [edge, uses] : edges) {
    if (uses.size() != 2) continue;
    // v_left from the lower-indexed triangle (uses are in triangle order).
    hinges.push_back(
        Hinge{{edge.first, edge.second, uses[0].second, uses[1].second}});
  }
  return hinges;
}

TriMesh load_tri_mesh(std::istream& in) {
  TriMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        throw MeshError("line " + std::to_string(lineno) +
                        ": malformed vertex");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // accept "i", "i/..", "i//.." face tokens
        const int v = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(v);
      }
      if (idx.size() != 3)
        throw MeshError("line " + std::to_string(lineno) +
                        ": non-triangle face with " +
                        std::to_string(idx.size()) + " vertices");
      std::array<int, 3> tri;
      for (int i = 0; i < 3; ++i) {
        int v = idx[i];
        if (v < 0) v = static_cast<int>(mesh.vertices.size()) + v + 1;
        if (v < 1 || v > static_cast<int>(mesh.vertices.size()))
          throw MeshError("line " + std::to_string(lineno) +
                          ": face index out of range");
        tri[i] = v - 1;
      }
      mesh.triangles.push_back(tri);
    }
    // other records (vn, vt, o, g, usemtl, ...) ignored
  }
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (!(triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                        mesh.vertices[tri[2]]) > 0.0))
      throw MeshError("triangle " + std::to_string(t) + ": degenerate");
  }
  mesh.hinges = build_hinges(mesh.triangles, mesh.num_vertices());
  return mesh;
}

TriMesh load_tri_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open " + path);
  return load_tri_mesh(in);
}

TetMesh load_tet_mesh(std::istream& node, std::istream& ele) {
  TetMesh mesh;
  {
    int n = 0;
    if (!(node >> n) || n <= 0) throw MeshError("node file: bad vertex count");
    std::string rest;
    std::getline(node, rest); // remainder of header line ignored
    mesh.vertices.resize(n);
    for (int i = 0; i < n; ++i) {
      int idx;
      Vec3 p;
      if (!(node >> idx >> p.x() >> p.y() >> p.z()))
        throw MeshError("node file: malformed vertex record " +
                        std::to_string(i));
      if (idx < 1 || idx > n)
        throw MeshError("node file: index out of range at record " +
                        std::to_string(i));
      mesh.vertices[idx - 1] = p;
    }
  }
  {
    int m = 0;
    if (!(ele >> m) || m <= 0) throw MeshError("ele file: bad tet count");
    std::string rest;
    std::getline(ele, rest);
    mesh.tets.resize(m);
    for (int i = 0; i < m; ++i) {
      int idx;
      std::array<int, 4> t;
      if (!(ele >> idx >> t[0] >> t[1] >> t[2] >> t[3]))
        throw MeshError("ele file: malformed tet record " + std::to_string(i));
      for (int& v : t) {
        if (v < 1 || v > mesh.num_vertices())
          throw MeshError("ele file: vertex index out of range in tet " +
                          std::to_string(idx));
        --v;
      }
      if (t[0] == t[1] || t[0] == t[2] || t[0] == t[3] || t[1] == t[2] ||
          t[1] == t[3] || t[2] == t[3])
        throw MeshError("ele file: repeated vertex index in tet " +
                        std::to_string(idx));
      mesh.tets[idx - 1] = t;
    }
  }
  for (size_t i = 0; i < mesh.tets.size(); ++i) {
    auto& t = mesh.tets[i];
    double vol = tet_signed_volume(mesh.vertices[t[0]], mesh.vertices[t[1]],
                                   mesh.vertices[t[2]], mesh.vertices[t[3]]);
    if (vol < 0.0) {
      std::swap(t[2], t[3]);
      vol = -vol;
    }
    if (!(vol > 0.0))
      throw MeshError("tet " + std::to_string(i) + ": zero rest volume");
  }
  return mesh;
}

TetMesh load_tet_mesh_files(const std::string& node_path,
                            const std::string& ele_path) {
  std::ifstream node(node_path), ele(ele_path);
  if (!node) throw MeshError("cannot open " + node_path);
  if (!ele) throw MeshError("cannot open " + ele_path);
  return load_tet_mesh(node, ele);
}

TriMesh generate_grid_cloth(int nx, int ny, double spacing) {
  if (nx < 2 || ny < 2 || !(spacing > 0.0))
    throw MeshError("grid cloth requires nx, ny >= 2 and spacing > 0");
  TriMesh mesh;
  mesh.vertices.reserve(static_cast<size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.vertices.emplace_back(i * spacing, 0.0, j * spacing);

  auto vid = [nx](int i, int j) { return j * nx + i; };
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({v00, v10, v11});
        mesh.triangles.push_back({v00, v11, v01});
      } else {
        mesh.triangles.push_back({v00, v10, v01});
        mesh.triangles.push_back({v10, v11, v01});
      }
    }
  }
  mesh.hinges = build_hinges(mesh.triangles, mesh.num_vertices());
  return mesh;
}

TetMesh generate_cube_tets(int n, double edge) {
  if (n < 1 || !(edge > 0.0))
    throw MeshError("cube tets require n >= 1 and edge > 0");
  TetMesh mesh;
  const int nv = n + 1;
  const double h = edge / n;
  mesh.vertices.reserve(static_cast<size_t>(nv) * nv * nv);
  for (int k = 0; k < nv; ++k)
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nv; ++i)
        mesh.vertices.emplace_back(i * h, j * h, k * h);

  auto vid = [nv](int i, int j, int k) { return (k * nv + j) * nv + i; };
  // Kuhn subdivision: 6 tets along the main cell diagonal 000 -> 111,
  // one per coordinate insertion order.
  static const int paths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (const auto& p : paths) {
          std::array<int, 3> c = {i, j, k};
          std::array<int, 4> tet;
          tet[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[p[s]] += 1;
            tet[s + 1] = vid(c[0], c[1], c[2]);
          }
          if (tet_signed_volume(mesh.vertices[tet[0]], mesh.vertices[tet[1]],
                                mesh.vertices[tet[2]],
                                mesh.vertices[tet[3]]) < 0.0)
            std::swap(tet[2], tet[3]);
          mesh.tets.push_back(tet);
        }
      }
    }
  }
  return mesh;
}

Coloring color_elements(const std::vector<std::vector<int>>& stencils) {
  if (stencils.empty()) throw MeshError("color_elements: no stencils");
  int num_vertices = 0;
  for (const auto& s : stencils)
    for (int v : s) num_vertices = std::max(num_vertices, v + 1);

  std::vector<std::vector<int>> vertex_terms(num_vertices);
  for (int e = 0; e < static_cast<int>(stencils.size()); ++e)
    for (int v : stencils[e]) vertex_terms[v].push_back(e);

  Coloring coloring;
  coloring.color.assign(stencils.size(), -1);
  std::vector<char> used;
  for (int e = 0; e < static_cast<int>(stencils.size()); ++e) {
    used.assign(coloring.classes.size() + 1, 0);
    for (int v : stencils[e])
      for (int other : vertex_terms[v])
        if (coloring.color[other] >= 0) used[coloring.color[other]] = 1;
    int c = 0;
    while (used[c]) ++c;
    coloring.color[e] = c;
    if (c == static_cast<int>(coloring.classes.size()))
      coloring.classes.emplace_back();
    coloring.classes[c].push_back(e);
  }
  return coloring;
}

} // namespace gpbd
