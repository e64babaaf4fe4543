#include "gpbd/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>

namespace gpbd {

double SdfGrid::value(const Vec3& p) const {
  const Vec3 q = (p - origin) / spacing;
  std::array<int, 3> i;
  Vec3 f;
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(q(a), 0.0, static_cast<double>(dims[a] - 1));
    i[a] = std::min(static_cast<int>(c), dims[a] - 2);
    f(a) = c - i[a];
  }
  auto at = [&](int dx, int dy, int dz) {
    return values[((i[2] + dz) * dims[1] + (i[1] + dy)) * dims[0] + i[0] + dx];
  };
  double v = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? f(0) : 1 - f(0)) * (dy ? f(1) : 1 - f(1)) *
                         (dz ? f(2) : 1 - f(2));
        v += w * at(dx, dy, dz);
      }
  return v;
}

Vec3 SdfGrid::gradient(const Vec3& p) const {
  const double h = 0.5 * spacing;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 lo = p, hi = p;
    lo(a) -= h;
    hi(a) += h;
    g(a) = (value(hi) - value(lo)) / (2.0 * h);
  }
  return g;
}

SdfGrid SdfGrid::load(std::istream& in) {
  SdfGrid g;
  if (!(in >> g.dims[0] >> g.dims[1] >> g.dims[2]))
    throw MeshError("sdf grid: bad dimensions");
  if (g.dims[0] < 2 || g.dims[1] < 2 || g.dims[2] < 2)
    throw MeshError("sdf grid: dimensions must be >= 2");
  if (!(in >> g.origin.x() >> g.origin.y() >> g.origin.z() >> g.spacing) ||
      !(g.spacing > 0.0))
    throw MeshError("sdf grid: bad origin/spacing");
  const size_t n =
      static_cast<size_t>(g.dims[0]) * g.dims[1] * g.dims[2];
  g.values.resize(n);
  for (size_t i = 0; i < n; ++i) {
    if (!(in >> g.values[i]) || !std::isfinite(g.values[i]))
      throw MeshError("sdf grid: bad value at index " + std::to_string(i));
  }
  return g;
}

SdfGrid SdfGrid::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open " + path);
  return load(in);
}

double Collider::sdf(const Vec3& p) const {
  switch (kind) {
    case ColliderKind::Plane:
      return (p - point).dot(normal);
    case ColliderKind::Sphere:
      return (p - center).norm() - radius;
    case ColliderKind::Grid:
      return grid.value(p);
  }
  return 0.0;
}

Vec3 Collider::sdf_gradient(const Vec3& p) const {
  switch (kind) {
    case ColliderKind::Plane:
      return normal;
    case ColliderKind::Sphere: {
      const Vec3 r = p - center;
      const double len = r.norm();
      return len > 1e-14 ? Vec3(r / len) : Vec3::Zero();
    }
    case ColliderKind::Grid:
      return grid.gradient(p);
  }
  return Vec3::Zero();
}

void project_pins(ParticleSystem& ps, const std::vector<Pin>& pins) {
  for (const auto& pin : pins) ps.x[pin.vertex] = pin.target;
}

void project_sdf(ParticleSystem& ps, const Collider& collider) {
  for (int j = 0; j < ps.size(); ++j) {
    if (ps.pinned(j)) continue;
    double phi = collider.sdf(ps.x[j]);
    if (phi >= 0.0) continue;
    // analytic colliders are exact in one move; grid SDFs re-project
    for (int pass = 0; pass < 8 && phi < 0.0; ++pass) {
      const Vec3 g = collider.sdf_gradient(ps.x[j]);
      const double glen = g.norm();
      if (glen <= 1e-12) break; // zero gradient at a penetrating vertex: skip
      ps.x[j] -= phi * g / (glen * glen);
      if (collider.kind != ColliderKind::Grid) break;
      phi = collider.sdf(ps.x[j]);
      if (std::abs(phi) <= 1e-13) break;
    }
  }
}

void project_two_way_sphere(ParticleSystem& ps, TwoWaySphere& sphere) {
  const double ws = 1.0 / sphere.mass;
  for (int j = 0; j < ps.size(); ++j) {
    const double wp = ps.inv_mass[j];
    const Vec3 r = ps.x[j] - sphere.center;
    const double len = r.norm();
    const double depth = sphere.radius - len;
    if (depth <= 0.0 || len <= 1e-14) continue;
    const Vec3 n = r / len;
    const double wsum = wp + ws;
    if (wsum <= 0.0) continue;
    ps.x[j] += (wp / wsum) * depth * n;
    sphere.center -= (ws / wsum) * depth * n;
  }
}

void fix_inversion(Mat3X& xs, const TetRest& rest,
                   const Eigen::Vector4d& masses) {
  Mat3 ds;
  ds.col(0) = xs.col(1) - xs.col(0);
  ds.col(1) = xs.col(2) - xs.col(0);
  ds.col(2) = xs.col(3) - xs.col(0);
  const Mat3 F = ds * rest.dm_inv;
  if (F.determinant() >= 0.0) return;

  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  Mat3 V = svd.matrixV();
  Vec3 sigma = svd.singularValues(); // descending
  // signed SVD: carry signs onto the last singular value so det U = det V = 1
  if (U.determinant() < 0.0) {
    U.col(2) *= -1.0;
    sigma(2) *= -1.0;
  }
  if (V.determinant() < 0.0) {
    V.col(2) *= -1.0;
    sigma(2) *= -1.0;
  }
  // rank-deficient elements: nudge tiny singular values before negation
  const double rest_scale = std::cbrt(6.0 * rest.volume);
  const double eps_inv = 1e-8 * rest_scale;
  for (int i = 0; i < 3; ++i)
    if (std::abs(sigma(i)) < eps_inv)
      sigma(i) = sigma(i) < 0.0 ? -eps_inv : eps_inv;
  sigma(2) = std::abs(sigma(2)); // negate the smallest, det > 0

  const Mat3 Fnew = U * sigma.asDiagonal() * V.transpose();
  const Mat3 dm = rest.dm_inv.inverse();

  Eigen::Vector4d m = masses;
  for (int i = 0; i < 4; ++i)
    if (!(m(i) > 0.0) || !std::isfinite(m(i))) m(i) = 1e12;
  const double msum = m.sum();

  const Vec3 centroid =
      (m(0) * xs.col(0) + m(1) * xs.col(1) + m(2) * xs.col(2) +
       m(3) * xs.col(3)) /
      msum;
  Mat3X p(3, 4);
  p.col(0).setZero();
  p.col(1) = Fnew * dm.col(0);
  p.col(2) = Fnew * dm.col(1);
  p.col(3) = Fnew * dm.col(2);
  const Vec3 pbar =
      (m(0) * p.col(0) + m(1) * p.col(1) + m(2) * p.col(2) + m(3) * p.col(3)) /
      msum;
  for (int i = 0; i < 4; ++i) xs.col(i) = centroid + p.col(i) - pbar;
}

double max_penetration(const ParticleSystem& ps,
                       const std::vector<Collider>& colliders) {
  double pen = 0.0;
  for (const auto& c : colliders)
    for (int j = 0; j < ps.size(); ++j)
      pen = std::max(pen, -c.sdf(ps.x[j]));
  return pen;
}

} // namespace gpbd
