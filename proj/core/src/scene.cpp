#include "gpbd/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gpbd/reference.hpp"

namespace gpbd {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw SceneError("scene config: " + path + ": " + msg);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end())
      fail(path + "." + key, "unknown key");
  }
}

Vec3 parse_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

MeshSource parse_mesh(const json& j, const std::string& path) {
  MeshSource m;
  if (j.contains("generator")) {
    const std::string gen = j.at("generator").get<std::string>();
    if (gen == "grid") {
      check_keys(j, path, {"generator", "nx", "ny", "spacing"});
      m.kind = MeshSource::Kind::Grid;
      m.nx = j.at("nx").get<int>();
      m.ny = j.at("ny").get<int>();
      m.spacing = j.at("spacing").get<double>();
      if (m.nx < 2 || m.ny < 2) fail(path, "grid requires nx, ny >= 2");
      if (!(m.spacing > 0.0)) fail(path + ".spacing", "must be > 0");
    } else if (gen == "cube") {
      check_keys(j, path, {"generator", "cells", "edge"});
      m.kind = MeshSource::Kind::Cube;
      m.cells = j.at("cells").get<int>();
      m.edge = j.at("edge").get<double>();
      if (m.cells < 1) fail(path + ".cells", "must be >= 1");
      if (!(m.edge > 0.0)) fail(path + ".edge", "must be > 0");
    } else {
      fail(path + ".generator", "unknown generator '" + gen + "'");
    }
  } else if (j.contains("obj")) {
    check_keys(j, path, {"obj"});
    m.kind = MeshSource::Kind::ObjFile;
    m.path = j.at("obj").get<std::string>();
  } else if (j.contains("node")) {
    check_keys(j, path, {"node", "ele"});
    m.kind = MeshSource::Kind::TetFiles;
    m.node_path = j.at("node").get<std::string>();
    m.ele_path = j.at("ele").get<std::string>();
  } else {
    fail(path, "need 'generator', 'obj', or 'node'/'ele'");
  }
  return m;
}

json print_mesh(const MeshSource& m) {
  json j;
  switch (m.kind) {
    case MeshSource::Kind::Grid:
      j["generator"] = "grid";
      j["nx"] = m.nx;
      j["ny"] = m.ny;
      j["spacing"] = m.spacing;
      break;
    case MeshSource::Kind::Cube:
      j["generator"] = "cube";
      j["cells"] = m.cells;
      j["edge"] = m.edge;
      break;
    case MeshSource::Kind::ObjFile:
      j["obj"] = m.path;
      break;
    case MeshSource::Kind::TetFiles:
      j["node"] = m.node_path;
      j["ele"] = m.ele_path;
      break;
  }
  return j;
}

MaterialSpec parse_material(const json& j, const std::string& path) {
  MaterialSpec m;
  const std::string model = j.at("model").get<std::string>();
  if (model == "cloth") {
    check_keys(j, path,
               {"model", "stretch_stiffness", "bend_stiffness",
                "bend_strain_scale"});
    m.model = MaterialSpec::Model::Cloth;
    m.stretch_stiffness = j.at("stretch_stiffness").get<double>();
    m.bend_stiffness = j.value("bend_stiffness", 0.0);
    if (j.contains("bend_strain_scale"))
      m.bend_strain_scale = j.at("bend_strain_scale").get<double>();
    if (!(m.stretch_stiffness > 0.0))
      fail(path + ".stretch_stiffness", "must be > 0");
    if (m.bend_stiffness < 0.0) fail(path + ".bend_stiffness", "must be >= 0");
  } else if (model == "neo-hookean-log" || model == "neo-hookean-stable") {
    check_keys(j, path, {"model", "young", "poisson"});
    m.model = model == "neo-hookean-log" ? MaterialSpec::Model::NeoHookeanLog
                                         : MaterialSpec::Model::NeoHookeanStable;
    m.young = j.at("young").get<double>();
    m.poisson = j.at("poisson").get<double>();
    if (!(m.young > 0.0)) fail(path + ".young", "must be > 0");
    if (!(m.poisson >= 0.0) || m.poisson >= 0.5)
      fail(path + ".poisson",
           "must lie in [0, 0.5); the Lame conversion is singular at 0.5");
  } else if (model == "springs") {
    check_keys(j, path, {"model", "compliance"});
    m.model = MaterialSpec::Model::Springs;
    m.compliance = j.at("compliance").get<double>();
    if (m.compliance < 0.0) fail(path + ".compliance", "must be >= 0");
  } else {
    fail(path + ".model", "unknown material model '" + model + "'");
  }
  return m;
}

json print_material(const MaterialSpec& m) {
  json j;
  switch (m.model) {
    case MaterialSpec::Model::Cloth:
      j["model"] = "cloth";
      j["stretch_stiffness"] = m.stretch_stiffness;
      j["bend_stiffness"] = m.bend_stiffness;
      if (m.bend_strain_scale) j["bend_strain_scale"] = *m.bend_strain_scale;
      break;
    case MaterialSpec::Model::NeoHookeanLog:
    case MaterialSpec::Model::NeoHookeanStable:
      j["model"] = m.model == MaterialSpec::Model::NeoHookeanLog
                       ? "neo-hookean-log"
                       : "neo-hookean-stable";
      j["young"] = m.young;
      j["poisson"] = m.poisson;
      break;
    case MaterialSpec::Model::Springs:
      j["model"] = "springs";
      j["compliance"] = m.compliance;
      break;
  }
  return j;
}

PinMotion parse_motion(const json& j, const std::string& path) {
  PinMotion m;
  const std::string type = j.at("type").get<std::string>();
  if (type == "linear") {
    check_keys(j, path, {"type", "velocity"});
    m.kind = PinMotion::Kind::Linear;
    m.velocity = parse_vec3(j.at("velocity"), path + ".velocity");
  } else if (type == "rotate") {
    check_keys(j, path, {"type", "axis", "center", "rate", "max_angle"});
    m.kind = PinMotion::Kind::Rotate;
    m.axis = parse_vec3(j.at("axis"), path + ".axis").normalized();
    m.center = parse_vec3(j.at("center"), path + ".center");
    m.rate = j.at("rate").get<double>();
    m.max_angle = j.value("max_angle", 0.0);
  } else {
    fail(path + ".type", "unknown motion '" + type + "'");
  }
  return m;
}

json print_motion(const PinMotion& m) {
  json j;
  if (m.kind == PinMotion::Kind::Linear) {
    j["type"] = "linear";
    j["velocity"] = vec3_json(m.velocity);
  } else {
    j["type"] = "rotate";
    j["axis"] = vec3_json(m.axis);
    j["center"] = vec3_json(m.center);
    j["rate"] = m.rate;
    j["max_angle"] = m.max_angle;
  }
  return j;
}

PinGroup parse_pin_group(const json& j, const std::string& path) {
  PinGroup g;
  check_keys(j, path, {"vertices", "select", "box_min", "box_max", "motion"});
  if (j.contains("vertices")) {
    for (const auto& v : j.at("vertices")) g.vertices.push_back(v.get<int>());
  }
  if (j.contains("select")) {
    g.select = j.at("select").get<std::string>();
    if (g.select != "corners" && g.select != "box")
      fail(path + ".select", "expected 'corners' or 'box'");
    if (g.select == "box") {
      g.box_min = parse_vec3(j.at("box_min"), path + ".box_min");
      g.box_max = parse_vec3(j.at("box_max"), path + ".box_max");
    }
  }
  if (g.vertices.empty() && g.select.empty())
    fail(path, "pin group selects no vertices");
  if (j.contains("motion")) g.motion = parse_motion(j.at("motion"), path + ".motion");
  return g;
}

json print_pin_group(const PinGroup& g) {
  json j;
  if (!g.vertices.empty()) j["vertices"] = g.vertices;
  if (!g.select.empty()) {
    j["select"] = g.select;
    if (g.select == "box") {
      j["box_min"] = vec3_json(g.box_min);
      j["box_max"] = vec3_json(g.box_max);
    }
  }
  if (g.motion.kind != PinMotion::Kind::None) j["motion"] = print_motion(g.motion);
  return j;
}

ColliderSpec parse_collider(const json& j, const std::string& path) {
  ColliderSpec c;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "plane") {
    check_keys(j, path, {"kind", "point", "normal", "friction"});
    c.kind = ColliderSpec::Kind::Plane;
    c.point = parse_vec3(j.at("point"), path + ".point");
    c.normal = parse_vec3(j.at("normal"), path + ".normal").normalized();
  } else if (kind == "sphere") {
    check_keys(j, path,
               {"kind", "center", "radius", "friction", "two_way", "mass",
                "velocity"});
    c.kind = ColliderSpec::Kind::Sphere;
    c.center = parse_vec3(j.at("center"), path + ".center");
    c.radius = j.at("radius").get<double>();
    if (!(c.radius > 0.0)) fail(path + ".radius", "must be > 0");
    c.two_way = j.value("two_way", false);
    if (c.two_way) {
      c.mass = j.at("mass").get<double>();
      if (!(c.mass > 0.0)) fail(path + ".mass", "must be > 0");
      if (j.contains("velocity"))
        c.velocity = parse_vec3(j.at("velocity"), path + ".velocity");
    }
  } else if (kind == "sdf") {
    check_keys(j, path, {"kind", "file", "friction"});
    c.kind = ColliderSpec::Kind::Sdf;
    c.sdf_file = j.at("file").get<std::string>();
  } else {
    fail(path + ".kind", "unknown collider kind '" + kind + "'");
  }
  c.friction = j.value("friction", 0.0);
  return c;
}

json print_collider(const ColliderSpec& c) {
  json j;
  switch (c.kind) {
    case ColliderSpec::Kind::Plane:
      j["kind"] = "plane";
      j["point"] = vec3_json(c.point);
      j["normal"] = vec3_json(c.normal);
      break;
    case ColliderSpec::Kind::Sphere:
      j["kind"] = "sphere";
      j["center"] = vec3_json(c.center);
      j["radius"] = c.radius;
      if (c.two_way) {
        j["two_way"] = true;
        j["mass"] = c.mass;
        j["velocity"] = vec3_json(c.velocity);
      }
      break;
    case ColliderSpec::Kind::Sdf:
      j["kind"] = "sdf";
      j["file"] = c.sdf_file;
      break;
  }
  if (c.friction != 0.0) j["friction"] = c.friction;
  return j;
}

SolverConfig parse_solver(const json& j, const std::string& path) {
  SolverConfig s;
  check_keys(j, path,
             {"dt", "substeps", "gpbd_iterations", "newton_budget", "mode",
              "omega", "damping"});
  s.dt = j.at("dt").get<double>();
  if (!(s.dt > 0.0)) fail(path + ".dt", "must be > 0");
  s.substeps = j.value("substeps", 1);
  if (s.substeps < 1) fail(path + ".substeps", "must be >= 1");
  s.gpbd_iterations = j.value("gpbd_iterations", 3);
  if (s.gpbd_iterations < 1) fail(path + ".gpbd_iterations", "must be >= 1");
  s.newton_budget = j.value("newton_budget", 5);
  if (s.newton_budget < 1) fail(path + ".newton_budget", "must be >= 1");
  const std::string mode = j.value("mode", std::string("gauss-seidel"));
  if (mode == "gauss-seidel")
    s.mode = ScheduleMode::GaussSeidel;
  else if (mode == "jacobi")
    s.mode = ScheduleMode::Jacobi;
  else
    fail(path + ".mode", "expected 'gauss-seidel' or 'jacobi'");
  if (j.contains("omega"))
    s.omega = j.at("omega").get<double>();
  else
    s.omega = s.mode == ScheduleMode::Jacobi ? 1.5 : 1.0;
  if (s.omega < 1.0 || s.omega >= 2.0) fail(path + ".omega", "must lie in [1, 2)");
  s.damping = j.value("damping", 0.0);
  if (s.damping < 0.0) fail(path + ".damping", "must be >= 0");
  return s;
}

json print_solver(const SolverConfig& s) {
  json j;
  j["dt"] = s.dt;
  j["substeps"] = s.substeps;
  j["gpbd_iterations"] = s.gpbd_iterations;
  j["newton_budget"] = s.newton_budget;
  j["mode"] = s.mode == ScheduleMode::GaussSeidel ? "gauss-seidel" : "jacobi";
  j["omega"] = s.omega;
  j["damping"] = s.damping;
  return j;
}

InitialTransform parse_initial(const json& j, const std::string& path) {
  InitialTransform t;
  const std::string type = j.at("type").get<std::string>();
  if (type == "scale") {
    check_keys(j, path, {"type", "factors"});
    t.kind = InitialTransform::Kind::Scale;
    t.factors = parse_vec3(j.at("factors"), path + ".factors");
  } else if (type == "translate") {
    check_keys(j, path, {"type", "offset"});
    t.kind = InitialTransform::Kind::Translate;
    t.offset = parse_vec3(j.at("offset"), path + ".offset");
  } else if (type == "randomize") {
    check_keys(j, path, {"type", "seed"});
    t.kind = InitialTransform::Kind::Randomize;
    t.seed = j.value("seed", 0u);
  } else {
    fail(path + ".type", "unknown initial transform '" + type + "'");
  }
  return t;
}

json print_initial(const InitialTransform& t) {
  json j;
  switch (t.kind) {
    case InitialTransform::Kind::Scale:
      j["type"] = "scale";
      j["factors"] = vec3_json(t.factors);
      break;
    case InitialTransform::Kind::Translate:
      j["type"] = "translate";
      j["offset"] = vec3_json(t.offset);
      break;
    case InitialTransform::Kind::Randomize:
      j["type"] = "randomize";
      j["seed"] = t.seed;
      break;
    case InitialTransform::Kind::None:
      break;
  }
  return j;
}

} // namespace

SceneSpec parse_scene(const std::string& config_text) {
  json j;
  try {
    j = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw SceneError(std::string("scene config: ") + e.what());
  }
  check_keys(j, "$",
             {"name", "mesh", "material", "density", "pins", "colliders",
              "gravity", "wind", "initial", "solver", "output", "steps"});
  SceneSpec s;
  s.name = j.value("name", std::string("scene"));
  if (!j.contains("mesh")) fail("$", "missing 'mesh'");
  s.mesh = parse_mesh(j.at("mesh"), "$.mesh");
  if (!j.contains("material")) fail("$", "missing 'material'");
  s.material = parse_material(j.at("material"), "$.material");
  s.density = j.value("density", 1.0);
  if (!(s.density > 0.0)) fail("$.density", "must be > 0");
  if (j.contains("pins")) {
    int idx = 0;
    for (const auto& p : j.at("pins"))
      s.pins.push_back(
          parse_pin_group(p, "$.pins[" + std::to_string(idx++) + "]"));
  }
  if (j.contains("colliders")) {
    int idx = 0;
    for (const auto& c : j.at("colliders"))
      s.colliders.push_back(
          parse_collider(c, "$.colliders[" + std::to_string(idx++) + "]"));
  }
  if (j.contains("gravity")) s.gravity = parse_vec3(j.at("gravity"), "$.gravity");
  if (j.contains("wind")) {
    check_keys(j.at("wind"), "$.wind", {"velocity", "drag"});
    WindSpec w;
    w.velocity = parse_vec3(j.at("wind").at("velocity"), "$.wind.velocity");
    w.drag = j.at("wind").value("drag", 1.0);
    s.wind = w;
  }
  if (j.contains("initial")) s.initial = parse_initial(j.at("initial"), "$.initial");
  if (!j.contains("solver")) fail("$", "missing 'solver'");
  s.solver = parse_solver(j.at("solver"), "$.solver");
  if (j.contains("output")) {
    check_keys(j.at("output"), "$.output", {"frame_stride", "format"});
    s.output.frame_stride = j.at("output").value("frame_stride", 1);
    if (s.output.frame_stride < 1) fail("$.output.frame_stride", "must be >= 1");
    s.output.format = j.at("output").value("format", std::string());
    if (!s.output.format.empty() && s.output.format != "obj" &&
        s.output.format != "node")
      fail("$.output.format", "expected 'obj' or 'node'");
  }
  s.steps = j.value("steps", 100);
  if (s.steps < 0) fail("$.steps", "must be >= 0");
  return s;
}

SceneSpec parse_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

std::string print_scene(const SceneSpec& s) {
  json j;
  j["name"] = s.name;
  j["mesh"] = print_mesh(s.mesh);
  j["material"] = print_material(s.material);
  j["density"] = s.density;
  if (!s.pins.empty()) {
    j["pins"] = json::array();
    for (const auto& p : s.pins) j["pins"].push_back(print_pin_group(p));
  }
  if (!s.colliders.empty()) {
    j["colliders"] = json::array();
    for (const auto& c : s.colliders) j["colliders"].push_back(print_collider(c));
  }
  j["gravity"] = vec3_json(s.gravity);
  if (s.wind) {
    j["wind"]["velocity"] = vec3_json(s.wind->velocity);
    j["wind"]["drag"] = s.wind->drag;
  }
  if (s.initial.kind != InitialTransform::Kind::None)
    j["initial"] = print_initial(s.initial);
  j["solver"] = print_solver(s.solver);
  j["output"]["frame_stride"] = s.output.frame_stride;
  if (!s.output.format.empty()) j["output"]["format"] = s.output.format;
  j["steps"] = s.steps;
  return j.dump(2);
}

// --- scene construction -------------------------------------------------------

namespace {

std::vector<std::pair<int, int>> unique_edges(
    const std::vector<std::array<int, 3>>& tris) {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : tris)
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.insert({a, b});
    }
  return {edges.begin(), edges.end()};
}

} // namespace

std::vector<Vec3> apply_wind(const ParticleSystem& ps, const TriMesh& mesh,
                             const Vec3& wind_velocity, double drag_coeff) {
  std::vector<Vec3> force(ps.size(), Vec3::Zero());
  for (const auto& t : mesh.triangles) {
    const Vec3& a = ps.x[t[0]];
    const Vec3& b = ps.x[t[1]];
    const Vec3& c = ps.x[t[2]];
    const Vec3 n = (b - a).cross(c - a);
    const double n2 = n.norm();
    if (n2 <= 1e-14) continue; // degenerate face
    const Vec3 nhat = n / n2;
    const double area = 0.5 * n2;
    const Vec3 v_face = (ps.v[t[0]] + ps.v[t[1]] + ps.v[t[2]]) / 3.0;
    // quadratic normal drag: vn |vn| keeps the force odd in the relative
    // velocity while scaling with dynamic pressure
    const double vn = (wind_velocity - v_face).dot(nhat);
    const Vec3 f = drag_coeff * area * vn * std::abs(vn) * nhat;
    for (int k = 0; k < 3; ++k) force[t[k]] += f / 3.0;
  }
  return force;
}

Scene::Scene(const SceneSpec& spec) : spec_(spec) {
  // mesh
  switch (spec.mesh.kind) {
    case MeshSource::Kind::Grid:
      tri_ = generate_grid_cloth(spec.mesh.nx, spec.mesh.ny, spec.mesh.spacing);
      is_surface_ = true;
      break;
    case MeshSource::Kind::ObjFile:
      tri_ = load_tri_mesh_file(spec.mesh.path);
      is_surface_ = true;
      break;
    case MeshSource::Kind::Cube:
      tet_ = generate_cube_tets(spec.mesh.cells, spec.mesh.edge);
      is_surface_ = false;
      break;
    case MeshSource::Kind::TetFiles:
      tet_ = load_tet_mesh_files(spec.mesh.node_path, spec.mesh.ele_path);
      is_surface_ = false;
      break;
  }
  const std::vector<Vec3>& rest_x = is_surface_ ? tri_.vertices : tet_.vertices;
  const int n = static_cast<int>(rest_x.size());

  // terms and rest data
  std::vector<std::unique_ptr<ForceTerm>> terms;
  std::vector<double> mass(n, 0.0);
  if (is_surface_) {
    if (spec.material.model == MaterialSpec::Model::NeoHookeanLog ||
        spec.material.model == MaterialSpec::Model::NeoHookeanStable)
      throw SceneError("neo-Hookean materials require a tet mesh");
    for (const auto& t : tri_.triangles) {
      const double area =
          triangle_area(rest_x[t[0]], rest_x[t[1]], rest_x[t[2]]);
      for (int k = 0; k < 3; ++k) mass[t[k]] += spec.density * area / 3.0;
    }
    if (spec.material.model == MaterialSpec::Model::Cloth) {
      const auto edges = unique_edges(tri_.triangles);
      double mean_edge = 0.0;
      for (const auto& [a, b] : edges)
        mean_edge += (rest_x[a] - rest_x[b]).norm();
      mean_edge /= static_cast<double>(edges.size());
      const double bend_scale = spec.material.bend_strain_scale
                                    ? *spec.material.bend_strain_scale
                                    : mean_edge * mean_edge;
      for (const auto& t : tri_.triangles) {
        terms.push_back(std::make_unique<MembraneTri>(
            t, tri_rest_state(rest_x[t[0]], rest_x[t[1]], rest_x[t[2]]),
            spec.material.stretch_stiffness));
      }
      if (spec.material.bend_stiffness > 0.0) {
        for (const auto& h : tri_.hinges) {
          const double theta0 = dihedral_angle(rest_x[h.v[0]], rest_x[h.v[1]],
                                               rest_x[h.v[2]], rest_x[h.v[3]]);
          auto term = std::make_unique<HingeBending>(
              h, theta0, spec.material.bend_stiffness);
          term->set_strain_scale(VecX::Constant(1, bend_scale));
          terms.push_back(std::move(term));
        }
      }
    } else { // springs
      for (const auto& [a, b] : unique_edges(tri_.triangles))
        terms.push_back(std::make_unique<DistanceConstraint>(
            a, b, (rest_x[a] - rest_x[b]).norm(), spec.material.compliance));
    }
  } else {
    if (spec.material.model != MaterialSpec::Model::NeoHookeanLog &&
        spec.material.model != MaterialSpec::Model::NeoHookeanStable)
      throw SceneError("tet meshes require a neo-Hookean material");
    const auto params = lame_from_young_poisson(
        spec.material.young, spec.material.poisson,
        spec.material.model == MaterialSpec::Model::NeoHookeanLog
            ? NeoHookeanVariant::LogBarrier
            : NeoHookeanVariant::Stable);
    tet_rests_.reserve(tet_.tets.size());
    for (const auto& t : tet_.tets) {
      const TetRest rest = tet_rest_state(rest_x[t[0]], rest_x[t[1]],
                                          rest_x[t[2]], rest_x[t[3]]);
      rest_volume_ += rest.volume;
      for (int k = 0; k < 4; ++k)
        mass[t[k]] += spec.density * rest.volume / 4.0;
      tet_rests_.push_back(rest);
      terms.push_back(std::make_unique<NeoHookeanTet>(t, rest, params));
    }
  }

  // pins: selected on rest positions, targeted at post-transform positions
  std::vector<Vec3> x = rest_x;
  Vec3 lo = rest_x[0], hi = rest_x[0];
  for (const auto& p : rest_x) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::set<int> pinned;
  for (const auto& group : spec_.pins) {
    std::vector<int> verts = group.vertices;
    for (int v : verts)
      if (v < 0 || v >= n) throw SceneError("pin vertex index out of range");
    if (group.select == "corners") {
      if (spec.mesh.kind != MeshSource::Kind::Grid)
        throw SceneError("'corners' pin selection requires a grid mesh");
      const int nx = spec.mesh.nx, ny = spec.mesh.ny;
      verts.insert(verts.end(),
                   {0, nx - 1, nx * (ny - 1), nx * ny - 1});
    } else if (group.select == "box") {
      for (int v = 0; v < n; ++v) {
        if ((rest_x[v].array() >= group.box_min.array()).all() &&
            (rest_x[v].array() <= group.box_max.array()).all())
          verts.push_back(v);
      }
    }
    for (int v : verts) pinned.insert(v);
  }

  // initial transform
  const Vec3 mid = 0.5 * (lo + hi);
  switch (spec.initial.kind) {
    case InitialTransform::Kind::Scale:
      for (auto& p : x) p = mid + (p - mid).cwiseProduct(spec.initial.factors);
      break;
    case InitialTransform::Kind::Translate:
      for (auto& p : x) p += spec.initial.offset;
      break;
    case InitialTransform::Kind::Randomize: {
      std::mt19937 rng(spec.initial.seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& p : x)
        for (int a = 0; a < 3; ++a)
          p(a) = lo(a) + u(rng) * (hi(a) - lo(a));
      break;
    }
    case InitialTransform::Kind::None:
      break;
  }

  for (const auto& group : spec_.pins) {
    std::vector<int> verts = group.vertices;
    if (group.select == "corners") {
      const int nx = spec.mesh.nx, ny = spec.mesh.ny;
      verts.insert(verts.end(), {0, nx - 1, nx * (ny - 1), nx * ny - 1});
    } else if (group.select == "box") {
      for (int v = 0; v < n; ++v)
        if ((rest_x[v].array() >= group.box_min.array()).all() &&
            (rest_x[v].array() <= group.box_max.array()).all())
          verts.push_back(v);
    }
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    for (int v : verts) {
      pin_rest_.emplace_back(v, x[v]);
      pin_motion_.push_back(&group.motion);
    }
  }

  // colliders
  for (const auto& cs : spec_.colliders) {
    if (cs.kind == ColliderSpec::Kind::Sphere && cs.two_way) {
      TwoWaySphere s;
      s.center = cs.center;
      s.radius = cs.radius;
      s.mass = cs.mass;
      s.velocity = cs.velocity;
      spheres_.push_back(s);
      continue;
    }
    Collider c;
    switch (cs.kind) {
      case ColliderSpec::Kind::Plane:
        c.kind = ColliderKind::Plane;
        c.point = cs.point;
        c.normal = cs.normal;
        break;
      case ColliderSpec::Kind::Sphere:
        c.kind = ColliderKind::Sphere;
        c.center = cs.center;
        c.radius = cs.radius;
        break;
      case ColliderSpec::Kind::Sdf:
        c.kind = ColliderKind::Grid;
        c.grid = SdfGrid::load_file(cs.sdf_file);
        break;
    }
    c.friction = cs.friction;
    colliders_.push_back(c);
  }

  ParticleSystem ps;
  ps.x = x;
  ps.v.assign(n, Vec3::Zero());
  ps.inv_mass.resize(n);
  for (int v = 0; v < n; ++v)
    ps.inv_mass[v] = pinned.count(v) ? 0.0 : 1.0 / mass[v];
  ps.x_tilde = ps.x;

  engine_ = std::make_unique<Engine>(std::move(ps), std::move(terms),
                                     spec_.solver);
  engine_->set_projection_pass([this](ParticleSystem& p) { apply_pass(p); });
  engine_->set_penetration_probe([this](const ParticleSystem& p) {
    double pen = max_penetration(p, colliders_);
    for (const auto& s : spheres_)
      for (int j = 0; j < p.size(); ++j)
        pen = std::max(pen, s.radius - (p.x[j] - s.center).norm());
    return pen;
  });
  const Vec3 gravity = spec_.gravity;
  std::vector<double> masses(mass);
  const bool has_wind = spec_.wind.has_value();
  engine_->set_external_force(
      [this, gravity, masses, has_wind](const ParticleSystem& p,
                                        std::vector<Vec3>& f) {
        for (int j = 0; j < p.size(); ++j) f[j] = masses[j] * gravity;
        if (has_wind && is_surface_) {
          const auto wf =
              apply_wind(p, tri_, spec_.wind->velocity, spec_.wind->drag);
          for (int j = 0; j < p.size(); ++j) f[j] += wf[j];
        }
      });
}

std::vector<Pin> Scene::pin_targets(double t) const {
  std::vector<Pin> pins;
  pins.reserve(pin_rest_.size());
  for (size_t i = 0; i < pin_rest_.size(); ++i) {
    const auto& [v, base] = pin_rest_[i];
    const PinMotion& m = *pin_motion_[i];
    Pin pin;
    pin.vertex = v;
    switch (m.kind) {
      case PinMotion::Kind::None:
        pin.target = base;
        break;
      case PinMotion::Kind::Linear:
        pin.target = base + t * m.velocity;
        break;
      case PinMotion::Kind::Rotate: {
        double angle = m.rate * t;
        if (m.max_angle != 0.0)
          angle = std::clamp(angle, -std::abs(m.max_angle),
                             std::abs(m.max_angle));
        const Eigen::AngleAxisd rot(angle, m.axis);
        pin.target = m.center + rot * (base - m.center);
        break;
      }
    }
    pins.push_back(pin);
  }
  return pins;
}

// Fixing one tet can re-invert a neighbour, so a few local passes are run
// and, if inversions survive them, the state is blended toward a rigid fit
// of the rest mesh just far enough that every element is un-inverted. The
// blend is the fallback that makes the non-inversion constraint a hard
// guarantee; local fixes alone stall on heavily tangled states.
void Scene::fix_inversions(ParticleSystem& ps) {
  const auto& terms = engine_->terms();
  bool any = true;
  for (int pass = 0; pass < 8 && any; ++pass) {
    any = false;
    for (size_t i = 0; i < tet_rests_.size(); ++i) {
      const auto& st = terms[i]->stencil();
      Mat3X xs = gather_positions(ps.x, st);
      if (tet_signed_volume(xs.col(0), xs.col(1), xs.col(2), xs.col(3)) > 0.0)
        continue;
      Eigen::Vector4d masses;
      for (int a = 0; a < 4; ++a) {
        const double w = ps.inv_mass[st[a]];
        masses(a) = w > 0.0 ? 1.0 / w : 0.0;
      }
      fix_inversion(xs, tet_rests_[i], masses);
      for (int a = 0; a < 4; ++a) ps.x[st[a]] = xs.col(a);
      any = true;
    }
  }
  if (!any) return;

  // mass-weighted rigid fit of the rest mesh to the current positions
  const int n = ps.size();
  double total = 0.0;
  Vec3 c_cur = Vec3::Zero(), c_rest = Vec3::Zero();
  std::vector<double> mass(n);
  for (int j = 0; j < n; ++j) {
    const double w = ps.inv_mass[j];
    mass[j] = w > 0.0 ? 1.0 / w : 0.0;
    total += mass[j];
    c_cur += mass[j] * ps.x[j];
    c_rest += mass[j] * tet_.vertices[j];
  }
  c_cur /= total;
  c_rest /= total;
  Mat3 cov = Mat3::Zero();
  for (int j = 0; j < n; ++j)
    cov += mass[j] * (ps.x[j] - c_cur) * (tet_.vertices[j] - c_rest).transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  const Mat3 rot = u * v.transpose();
  std::vector<Vec3> fit(n);
  for (int j = 0; j < n; ++j)
    fit[j] = rot * (tet_.vertices[j] - c_rest) + c_cur;

  // smallest blend (in 64ths) with every element strictly positive; t = 1
  // reproduces the rigid fit exactly, so the scan always terminates
  auto feasible = [&](double t) {
    for (const auto& tt : tet_.tets) {
      Vec3 p[4];
      for (int a = 0; a < 4; ++a)
        p[a] = (1.0 - t) * ps.x[tt[a]] + t * fit[tt[a]];
      if (tet_signed_volume(p[0], p[1], p[2], p[3]) <= 0.0) return false;
    }
    return true;
  };
  double t = 1.0;
  for (int k = 1; k <= 64; ++k) {
    const double cand = static_cast<double>(k) / 64.0;
    if (feasible(cand)) {
      t = cand;
      break;
    }
  }
  for (int j = 0; j < n; ++j)
    if (ps.inv_mass[j] > 0.0) ps.x[j] = (1.0 - t) * ps.x[j] + t * fit[j];
}

void Scene::apply_pass(ParticleSystem& ps) {
  // inversion recovery first, then collisions, pins last (exact)
  if (!is_surface_) fix_inversions(ps);
  for (const auto& c : colliders_) project_sdf(ps, c);
  for (auto& s : spheres_) project_two_way_sphere(ps, s);
  project_pins(ps, pin_targets(time_ + spec_.solver.dt));
}

void Scene::advance() {
  const double dt = spec_.solver.dt;
  std::vector<Vec3> sphere_prev(spheres_.size());
  for (size_t i = 0; i < spheres_.size(); ++i) {
    sphere_prev[i] = spheres_[i].center;
    spheres_[i].velocity += dt * spec_.gravity;
    spheres_[i].center += dt * spheres_[i].velocity;
  }
  engine_->step();
  for (size_t i = 0; i < spheres_.size(); ++i)
    spheres_[i].velocity = (spheres_[i].center - sphere_prev[i]) / dt;
  time_ += dt;
}

double Scene::current_volume() const {
  if (is_surface_) return 0.0;
  const auto& x = engine_->particles().x;
  double vol = 0.0;
  for (const auto& t : tet_.tets)
    vol += tet_signed_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]);
  return vol;
}

// --- runner --------------------------------------------------------------------

namespace {

bool state_finite(const ParticleSystem& ps) {
  for (int j = 0; j < ps.size(); ++j)
    if (!ps.x[j].allFinite()) return false;
  return true;
}

void write_obj_frame(const std::string& path, const TriMesh& mesh,
                     const std::vector<Vec3>& x) {
  std::ofstream out(path);
  out.precision(12);
  for (const auto& p : x)
    out << "v " << p.x() << " " << p.y() << " " << p.z() << "\n";
  for (const auto& t : mesh.triangles)
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

void write_node_frame(const std::string& path, const std::vector<Vec3>& x) {
  std::ofstream out(path);
  out.precision(12);
  out << x.size() << " 3 0 0\n";
  for (size_t i = 0; i < x.size(); ++i)
    out << i + 1 << " " << x[i].x() << " " << x[i].y() << " " << x[i].z()
        << "\n";
}

} // namespace

RunResult run_scene(const SceneSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  RunResult result;
  Scene scene(spec);
  const bool obj = spec.output.format.empty() ? scene.is_surface()
                                              : spec.output.format == "obj";

  auto frame_path = [&](int frame) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05d.%s", frame,
                  obj ? "obj" : "node");
    return (fs::path(out_dir) / buf).string();
  };
  auto write_frame = [&](int frame) {
    if (obj)
      write_obj_frame(frame_path(frame), scene.tri_mesh(),
                      scene.engine().particles().x);
    else
      write_node_frame(frame_path(frame), scene.engine().particles().x);
    ++result.frames_written;
    result.last_good_frame = frame;
  };

  write_frame(0);
  std::string error;
  for (int step = 1; step <= spec.steps; ++step) {
    try {
      scene.advance();
    } catch (const std::exception& e) {
      error = e.what();
      break;
    }
    if (!state_finite(scene.engine().particles())) {
      error = "non-finite state at step " + std::to_string(step);
      break;
    }
    if (step % spec.output.frame_stride == 0) write_frame(step);
  }

  // metrics: one row per sweep
  {
    std::ofstream csv(fs::path(out_dir) / "metrics.csv");
    csv << "step,substep,sweep,residual,max_penetration,energy,t_solve,"
           "t_project\n";
    csv.precision(12);
    for (const auto& r : scene.engine().metrics())
      csv << r.step << "," << r.substep << "," << r.sweep << "," << r.residual
          << "," << r.max_penetration << "," << r.energy << "," << r.t_solve
          << "," << r.t_project << "\n";
  }
  {
    double t_total = 0.0;
    for (const auto& r : scene.engine().metrics())
      t_total += r.t_solve + r.t_project;
    const auto& m = scene.engine().metrics();
    const int steps_run = m.empty() ? 0 : m.back().step + 1;
    std::ofstream summary(fs::path(out_dir) / "summary.txt");
    summary << "scene: " << spec.name << "\n";
    summary << "verts: " << scene.engine().particles().size() << "\n";
    summary << "elements: " << scene.engine().terms().size() << "\n";
    summary << "i_G: " << spec.solver.gpbd_iterations << "\n";
    summary << "i_N: " << spec.solver.newton_budget << "\n";
    summary << "t_avg_ms: "
            << (steps_run > 0 ? 1000.0 * t_total / steps_run : 0.0) << "\n";
    summary << "status: " << (error.empty() ? "ok" : error) << "\n";
  }

  if (!error.empty()) {
    result.exit_code = 1;
    result.message = error + " (last good frame " +
                     std::to_string(result.last_good_frame) + ")";
  }
  return result;
}

} // namespace gpbd
