#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpbd/engine.hpp"
#include "gpbd/projection.hpp"
#include "gpbd/types.hpp"

namespace gpbd {

struct SceneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeshSource {
  enum class Kind { Grid, Cube, ObjFile, TetFiles };
  Kind kind = Kind::Grid;
  int nx = 2, ny = 2;     // grid
  double spacing = 1.0;   // grid
  int cells = 1;          // cube
  double edge = 1.0;      // cube
  std::string path;       // obj
  std::string node_path, ele_path;
};

struct MaterialSpec {
  enum class Model { Cloth, NeoHookeanLog, NeoHookeanStable, Springs };
  Model model = Model::Cloth;
  double young = 1e5;
  double poisson = 0.45;
  double stretch_stiffness = 100.0;
  double bend_stiffness = 1e-4;
  std::optional<double> bend_strain_scale; // default: mean rest edge length^2
  double compliance = 0.0; // springs
};

struct PinMotion {
  enum class Kind { None, Linear, Rotate };
  Kind kind = Kind::None;
  Vec3 velocity = Vec3::Zero(); // linear
  Vec3 axis = Vec3::UnitX();    // rotate
  Vec3 center = Vec3::Zero();
  double rate = 0.0;      // rad/s
  double max_angle = 0.0; // 0 = unbounded
};

struct PinGroup {
  std::vector<int> vertices;  // explicit indices
  std::string select;         // "", "corners", "box"
  Vec3 box_min = Vec3::Zero();
  Vec3 box_max = Vec3::Zero();
  PinMotion motion;
};

struct ColliderSpec {
  enum class Kind { Plane, Sphere, Sdf };
  Kind kind = Kind::Plane;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  std::string sdf_file;
  double friction = 0.0;
  bool two_way = false;
  double mass = 1.0;
  Vec3 velocity = Vec3::Zero(); // two-way initial velocity
};

struct WindSpec {
  Vec3 velocity = Vec3::Zero();
  double drag = 1.0;
};

struct InitialTransform {
  enum class Kind { None, Scale, Translate, Randomize };
  Kind kind = Kind::None;
  Vec3 factors = Vec3::Ones();
  Vec3 offset = Vec3::Zero();
  unsigned seed = 0;
};

struct OutputPlan {
  int frame_stride = 1;
  std::string format; // "obj" or "node"; default by mesh type
};

struct SceneSpec {
  std::string name;
  MeshSource mesh;
  MaterialSpec material;
  double density = 1.0; // kg/m^2 (surfaces) or kg/m^3 (solids)
  std::vector<PinGroup> pins;
  std::vector<ColliderSpec> colliders;
  Vec3 gravity = Vec3(0.0, -9.8, 0.0);
  std::optional<WindSpec> wind;
  InitialTransform initial;
  SolverConfig solver;
  OutputPlan output;
  int steps = 100;
};

SceneSpec parse_scene(const std::string& config_text);
SceneSpec parse_scene_file(const std::string& path);
std::string print_scene(const SceneSpec& spec);

// Concrete scene: engine + boundary conditions + output topology.
class Scene {
public:
  explicit Scene(const SceneSpec& spec);

  Engine& engine() { return *engine_; }
  const Engine& engine() const { return *engine_; }
  const SceneSpec& spec() const { return spec_; }
  const TriMesh& tri_mesh() const { return tri_; }
  const TetMesh& tet_mesh() const { return tet_; }
  bool is_surface() const { return is_surface_; }
  const std::vector<TwoWaySphere>& spheres() const { return spheres_; }
  double time() const { return time_; }
  double rest_volume() const { return rest_volume_; }
  double current_volume() const;

  // Advance by one solver step (spec.solver.dt).
  void advance();

private:
  void apply_pass(ParticleSystem& ps);
  void fix_inversions(ParticleSystem& ps);
  std::vector<Pin> pin_targets(double t) const;

  SceneSpec spec_;
  TriMesh tri_;
  TetMesh tet_;
  bool is_surface_ = true;
  std::unique_ptr<Engine> engine_;
  std::vector<Collider> colliders_;
  std::vector<TwoWaySphere> spheres_;
  std::vector<std::pair<int, Vec3>> pin_rest_; // vertex, post-transform pos
  std::vector<const PinMotion*> pin_motion_;
  std::vector<TetRest> tet_rests_;
  double rest_volume_ = 0.0;
  double time_ = 0.0;
};

// Per-face quadratic normal drag, distributed equally to face vertices.
std::vector<Vec3> apply_wind(const ParticleSystem& ps, const TriMesh& mesh,
                             const Vec3& wind_velocity, double drag_coeff);

struct RunResult {
  int exit_code = 0;
  int frames_written = 0;
  int last_good_frame = -1;
  std::string message;
};

RunResult run_scene(const SceneSpec& spec, const std::string& out_dir);

} // namespace gpbd
