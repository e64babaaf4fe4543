#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gpbd/engine.hpp"
#include "gpbd/mesh.hpp"
#include "gpbd/types.hpp"

namespace gpbd {

// Trilinear signed-distance grid; plain-text format in docs/formats.md.
struct SdfGrid {
  std::array<int, 3> dims = {0, 0, 0};
  Vec3 origin = Vec3::Zero();
  double spacing = 0.0;
  std::vector<double> values; // row-major: x fastest, then y, then z

  double value(const Vec3& p) const;
  Vec3 gradient(const Vec3& p) const;

  static SdfGrid load(std::istream& in);
  static SdfGrid load_file(const std::string& path);
};

enum class ColliderKind { Plane, Sphere, Grid };

struct Collider {
  ColliderKind kind = ColliderKind::Plane;
  // plane: point + unit normal; sphere: center + radius
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  SdfGrid grid;
  double friction = 0.0; // reserved
  bool two_way = false;
  double mass = 0.0; // collider mass when two_way

  double sdf(const Vec3& p) const;
  Vec3 sdf_gradient(const Vec3& p) const;
};

struct Pin {
  int vertex = -1;
  Vec3 target = Vec3::Zero();
};

// Sets pinned vertices exactly to their targets.
void project_pins(ParticleSystem& ps, const std::vector<Pin>& pins);

// Moves every penetrating vertex (sdf < 0) to the zero level set along the
// SDF gradient; vertices with sdf >= 0 untouched.
void project_sdf(ParticleSystem& ps, const Collider& collider);

struct TwoWaySphere {
  Vec3 center = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double radius = 1.0;
  double mass = 1.0;
};

// Separates penetrating vertices and the sphere along the contact normal,
// split by inverse-mass weights.
void project_two_way_sphere(ParticleSystem& ps, TwoWaySphere& sphere);

// Inversion recovery: negate the smallest singular value of F so det F > 0,
// rebuilding the stencil about the mass-weighted centroid. No-op when
// det F >= 0. Masses are 1/inv_mass; zero inverse masses are treated as a
// large finite mass.
void fix_inversion(Mat3X& xs, const TetRest& rest,
                   const Eigen::Vector4d& masses);

double max_penetration(const ParticleSystem& ps,
                       const std::vector<Collider>& colliders);

} // namespace gpbd
