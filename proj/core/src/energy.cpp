#include "gpbd/energy.hpp"

#include <cmath>

namespace gpbd {

NeoHookeanParams lame_from_young_poisson(double young, double poisson,
                                         NeoHookeanVariant variant) {
  if (!(young > 0.0))
    throw EnergyDomainError("Young's modulus must be positive");
  if (!(poisson >= 0.0) || poisson >= 0.5)
    throw EnergyDomainError("Poisson ratio must lie in [0, 0.5)");
  NeoHookeanParams p;
  p.mu = young / (2.0 * (1.0 + poisson));
  p.lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  p.variant = variant;
  return p;
}

Mat3 tet_deformation_gradient(const Mat3X& xs, const TetRest& rest) {
  Mat3 ds;
  ds.col(0) = xs.col(1) - xs.col(0);
  ds.col(1) = xs.col(2) - xs.col(0);
  ds.col(2) = xs.col(3) - xs.col(0);
  return ds * rest.dm_inv;
}

Mat3x2 tri_deformation_gradient(const Mat3X& xs, const TriRest& rest) {
  Mat3x2 ds;
  ds.col(0) = xs.col(1) - xs.col(0);
  ds.col(1) = xs.col(2) - xs.col(0);
  return ds * rest.dm_inv;
}

VecX green_strain_vector(const Mat3& F) {
  const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
  VecX s(6);
  s << E(0, 0), E(1, 1), E(2, 2), E(0, 1), E(0, 2), E(1, 2);
  return s;
}

VecX green_strain_vector(const Mat3x2& F) {
  const Mat2 E = 0.5 * (F.transpose() * F - Mat2::Identity());
  VecX s(3);
  s << E(0, 0), E(0, 1), E(1, 1);
  return s;
}

double dihedral_angle(const Vec3& e0, const Vec3& e1, const Vec3& vl,
                      const Vec3& vr) {
  const Vec3 e = e1 - e0;
  const Vec3 n1 = e.cross(vl - e0);
  const Vec3 n2 = (vr - e0).cross(e);
  const double elen = e.norm();
  const double scale = elen * elen;
  if (n1.norm() <= 1e-14 * scale || n2.norm() <= 1e-14 * scale ||
      elen <= 0.0)
    throw EnergyDomainError("dihedral_angle: degenerate triangle");
  const double y = n1.cross(n2).dot(e) / elen;
  const double x = n1.dot(n2);
  return std::atan2(y, x);
}

double nh_energy(const Mat3& F, double volume, const NeoHookeanParams& p) {
  const double i2 = F.squaredNorm();
  const double j = F.determinant();
  if (p.variant == NeoHookeanVariant::LogBarrier) {
    if (!(j > 0.0))
      throw EnergyDomainError("log-barrier neo-Hookean requires det F > 0");
    const double lj = std::log(j);
    return volume *
           (0.5 * p.mu * (i2 - 3.0) - p.mu * lj + 0.5 * p.lambda * lj * lj);
  }
  return volume * (0.5 * p.mu * (i2 - 3.0) - p.mu * (j - 1.0) +
                   0.5 * p.lambda * (j - 1.0) * (j - 1.0));
}

// --- ForceTerm base ----------------------------------------------------------

ForceTerm::ForceTerm(std::vector<int> stencil, int k)
    : stencil_(std::move(stencil)), k_(k), scale_(VecX::Ones(k)) {}

void ForceTerm::set_strain_scale(const VecX& scale) {
  if (scale.size() != k_ || (scale.array() <= 0.0).any())
    throw EnergyDomainError("strain scale must be positive with k entries");
  scale_ = scale;
}

VecX ForceTerm::strain(const Mat3X& xs) const {
  return scale_.cwiseProduct(raw_strain(xs));
}

MatX ForceTerm::strain_jacobian(const Mat3X& xs) const {
  return scale_.asDiagonal() * raw_jacobian(xs);
}

double ForceTerm::energy(const VecX& s) const {
  return raw_energy(s.cwiseQuotient(scale_));
}

VecX ForceTerm::energy_grad(const VecX& s) const {
  return raw_grad(s.cwiseQuotient(scale_)).cwiseQuotient(scale_);
}

MatX ForceTerm::energy_hess(const VecX& s) const {
  const VecX inv = scale_.cwiseInverse();
  return inv.asDiagonal() * raw_hess(s.cwiseQuotient(scale_)) *
         inv.asDiagonal();
}

bool ForceTerm::strain_admissible(const VecX& s) const {
  return raw_admissible(s.cwiseQuotient(scale_));
}

double ForceTerm::full_energy(const Mat3X& xs) const {
  return raw_energy(raw_strain(xs));
}

VecX ForceTerm::full_force(const Mat3X& xs) const {
  return -raw_jacobian(xs).transpose() * raw_grad(raw_strain(xs));
}

Mat3X gather_positions(const std::vector<Vec3>& x,
                       const std::vector<int>& stencil) {
  Mat3X xs(3, stencil.size());
  for (size_t i = 0; i < stencil.size(); ++i) xs.col(i) = x[stencil[i]];
  return xs;
}

// --- compliant constraints ---------------------------------------------------

DistanceConstraint::DistanceConstraint(int v0, int v1, double rest_length,
                                       double compliance)
    : ForceTerm({v0, v1}, 1), rest_(rest_length), alpha_(compliance) {
  if (alpha_ < 0.0) throw EnergyDomainError("compliance must be >= 0");
}

VecX DistanceConstraint::raw_strain(const Mat3X& xs) const {
  VecX s(1);
  s(0) = (xs.col(1) - xs.col(0)).norm() - rest_;
  return s;
}

MatX DistanceConstraint::raw_jacobian(const Mat3X& xs) const {
  const Vec3 n = (xs.col(1) - xs.col(0)).normalized();
  MatX J(1, 6);
  J << -n.transpose(), n.transpose();
  return J;
}

double DistanceConstraint::raw_energy(const VecX& s) const {
  if (alpha_ == 0.0) return 0.0; // hard constraint: energy is an indicator
  return 0.5 * s(0) * s(0) / alpha_;
}

VecX DistanceConstraint::raw_grad(const VecX& s) const {
  if (alpha_ == 0.0)
    throw EnergyDomainError("hard constraint has no finite energy gradient");
  return s / alpha_;
}

MatX DistanceConstraint::raw_hess(const VecX&) const {
  if (alpha_ == 0.0)
    throw EnergyDomainError("hard constraint has no finite energy Hessian");
  return MatX::Constant(1, 1, 1.0 / alpha_);
}

PinConstraint::PinConstraint(int v, const Vec3& target, double compliance)
    : ForceTerm({v}, 1), target_(target), alpha_(compliance) {
  if (alpha_ < 0.0) throw EnergyDomainError("compliance must be >= 0");
}

VecX PinConstraint::raw_strain(const Mat3X& xs) const {
  VecX s(1);
  s(0) = (xs.col(0) - target_).norm();
  return s;
}

MatX PinConstraint::raw_jacobian(const Mat3X& xs) const {
  Vec3 diff = xs.col(0) - target_;
  const double len = diff.norm();
  if (len > 1e-14)
    diff /= len;
  else
    diff.setZero();
  MatX J(1, 3);
  J << diff.transpose();
  return J;
}

double PinConstraint::raw_energy(const VecX& s) const {
  if (alpha_ == 0.0) return 0.0;
  return 0.5 * s(0) * s(0) / alpha_;
}

VecX PinConstraint::raw_grad(const VecX& s) const {
  if (alpha_ == 0.0)
    throw EnergyDomainError("hard constraint has no finite energy gradient");
  return s / alpha_;
}

MatX PinConstraint::raw_hess(const VecX&) const {
  if (alpha_ == 0.0)
    throw EnergyDomainError("hard constraint has no finite energy Hessian");
  return MatX::Constant(1, 1, 1.0 / alpha_);
}

// --- Green-strain helpers ----------------------------------------------------

namespace {

// Symmetric tensor basis for the 6-vector (e_xx, e_yy, e_zz, e_xy, e_xz, e_yz).
const Mat3& strain_basis(int p) {
  static const std::array<Mat3, 6> basis = [] {
    std::array<Mat3, 6> b;
    for (auto& m : b) m.setZero();
    b[0](0, 0) = 1.0;
    b[1](1, 1) = 1.0;
    b[2](2, 2) = 1.0;
    b[3](0, 1) = b[3](1, 0) = 1.0;
    b[4](0, 2) = b[4](2, 0) = 1.0;
    b[5](1, 2) = b[5](2, 1) = 1.0;
    return b;
  }();
  return basis[p];
}

Mat3 cauchy_green_from_strain(const VecX& s) {
  Mat3 E;
  E << s(0), s(3), s(4), s(3), s(1), s(5), s(4), s(5), s(2);
  return 2.0 * E + Mat3::Identity();
}

// d ln det C / ds_p and d^2 ln det C / ds_p ds_q for C = 2E + I.
void log_det_derivatives(const Mat3& Cinv, VecX& L, MatX& L2) {
  L.resize(6);
  L2.resize(6, 6);
  std::array<Mat3, 6> GD;
  for (int p = 0; p < 6; ++p) {
    GD[p] = Cinv * strain_basis(p);
    L(p) = 2.0 * GD[p].trace();
  }
  for (int p = 0; p < 6; ++p)
    for (int q = p; q < 6; ++q) {
      const double v = -4.0 * (GD[q] * GD[p]).trace();
      L2(p, q) = v;
      L2(q, p) = v;
    }
}

} // namespace

// --- neo-Hookean tet ----------------------------------------------------------

NeoHookeanTet::NeoHookeanTet(const std::array<int, 4>& verts,
                             const TetRest& rest,
                             const NeoHookeanParams& params)
    : ForceTerm({verts[0], verts[1], verts[2], verts[3]}, 6),
      rest_(rest),
      params_(params) {}

VecX NeoHookeanTet::raw_strain(const Mat3X& xs) const {
  return green_strain_vector(tet_deformation_gradient(xs, rest_));
}

MatX NeoHookeanTet::raw_jacobian(const Mat3X& xs) const {
  const Mat3 F = tet_deformation_gradient(xs, rest_);
  // dF for coordinate (vertex a, axis c) is e_c h_a^T; dE entries follow from
  // dE = (h f_c^T + f_c h^T)/2 with f_c = F^T e_c.
  std::array<Vec3, 4> h;
  h[1] = rest_.dm_inv.row(0).transpose();
  h[2] = rest_.dm_inv.row(1).transpose();
  h[3] = rest_.dm_inv.row(2).transpose();
  h[0] = -(h[1] + h[2] + h[3]);
  MatX J(6, 12);
  for (int a = 0; a < 4; ++a) {
    for (int c = 0; c < 3; ++c) {
      const Vec3 fc = F.row(c).transpose();
      const int col = 3 * a + c;
      J(0, col) = h[a](0) * fc(0);
      J(1, col) = h[a](1) * fc(1);
      J(2, col) = h[a](2) * fc(2);
      J(3, col) = 0.5 * (h[a](0) * fc(1) + fc(0) * h[a](1));
      J(4, col) = 0.5 * (h[a](0) * fc(2) + fc(0) * h[a](2));
      J(5, col) = 0.5 * (h[a](1) * fc(2) + fc(1) * h[a](2));
    }
  }
  return J;
}

bool NeoHookeanTet::raw_admissible(const VecX& s) const {
  return cauchy_green_from_strain(s).determinant() > 0.0;
}

// defined in the projections module; declared here to avoid a header cycle
void fix_inversion(Mat3X& xs, const TetRest& rest,
                   const Eigen::Vector4d& masses);

Mat3X NeoHookeanTet::project_admissible(const Mat3X& xs,
                                        const VecX& masses) const {
  Mat3X out = xs;
  fix_inversion(out, rest_, Eigen::Vector4d(masses));
  return out;
}

double NeoHookeanTet::raw_energy(const VecX& s) const {
  const Mat3 C = cauchy_green_from_strain(s);
  const double trc = C.trace();
  const double detc = C.determinant();
  if (!(detc > 0.0))
    throw EnergyDomainError("neo-Hookean strain outside admissible domain");
  const double v = rest_.volume;
  const double mu = params_.mu, la = params_.lambda;
  if (params_.variant == NeoHookeanVariant::LogBarrier) {
    const double ld = std::log(detc);
    return v * (0.5 * mu * (trc - 3.0) - 0.5 * mu * ld + 0.125 * la * ld * ld);
  }
  const double j = std::sqrt(detc);
  return v * (0.5 * mu * (trc - 3.0) - mu * (j - 1.0) +
              0.5 * la * (j - 1.0) * (j - 1.0));
}

VecX NeoHookeanTet::raw_grad(const VecX& s) const {
  const Mat3 C = cauchy_green_from_strain(s);
  const double detc = C.determinant();
  if (!(detc > 0.0))
    throw EnergyDomainError("neo-Hookean strain outside admissible domain");
  const Mat3 Cinv = C.inverse();
  VecX L;
  MatX L2;
  log_det_derivatives(Cinv, L, L2);
  const double v = rest_.volume;
  const double mu = params_.mu, la = params_.lambda;
  VecX trp(6);
  trp << 2.0, 2.0, 2.0, 0.0, 0.0, 0.0;
  if (params_.variant == NeoHookeanVariant::LogBarrier) {
    const double ld = std::log(detc);
    return v * (0.5 * mu * trp + (-0.5 * mu + 0.25 * la * ld) * L);
  }
  const double j = std::sqrt(detc);
  const VecX jp = 0.5 * j * L;
  return v * (0.5 * mu * trp + (la * (j - 1.0) - mu) * jp);
}

MatX NeoHookeanTet::raw_hess(const VecX& s) const {
  const Mat3 C = cauchy_green_from_strain(s);
  const double detc = C.determinant();
  if (!(detc > 0.0))
    throw EnergyDomainError("neo-Hookean strain outside admissible domain");
  const Mat3 Cinv = C.inverse();
  VecX L;
  MatX L2;
  log_det_derivatives(Cinv, L, L2);
  const double v = rest_.volume;
  const double mu = params_.mu, la = params_.lambda;
  if (params_.variant == NeoHookeanVariant::LogBarrier) {
    const double ld = std::log(detc);
    return v * (0.25 * la * L * L.transpose() +
                (-0.5 * mu + 0.25 * la * ld) * L2);
  }
  const double j = std::sqrt(detc);
  const VecX jp = 0.5 * j * L;
  const MatX jpq = jp * (0.5 * L.transpose()) + 0.5 * j * L2;
  return v * (la * jp * jp.transpose() + (la * (j - 1.0) - mu) * jpq);
}

// --- membrane ------------------------------------------------------------------

MembraneTri::MembraneTri(const std::array<int, 3>& verts, const TriRest& rest,
                         double stretch_stiffness)
    : ForceTerm({verts[0], verts[1], verts[2]}, 3),
      rest_(rest),
      ks_(stretch_stiffness) {}

VecX MembraneTri::raw_strain(const Mat3X& xs) const {
  return green_strain_vector(tri_deformation_gradient(xs, rest_));
}

MatX MembraneTri::raw_jacobian(const Mat3X& xs) const {
  const Mat3x2 F = tri_deformation_gradient(xs, rest_);
  std::array<Vec2, 3> h;
  h[1] = rest_.dm_inv.row(0).transpose();
  h[2] = rest_.dm_inv.row(1).transpose();
  h[0] = -(h[1] + h[2]);
  MatX J(3, 9);
  for (int a = 0; a < 3; ++a) {
    for (int c = 0; c < 3; ++c) {
      const Vec2 fc = F.row(c).transpose();
      const int col = 3 * a + c;
      J(0, col) = h[a](0) * fc(0);
      J(1, col) = 0.5 * (h[a](0) * fc(1) + fc(0) * h[a](1));
      J(2, col) = h[a](1) * fc(1);
    }
  }
  return J;
}

double MembraneTri::raw_energy(const VecX& s) const {
  return 0.5 * ks_ * rest_.area *
         (s(0) * s(0) + s(2) * s(2) + 2.0 * s(1) * s(1));
}

VecX MembraneTri::raw_grad(const VecX& s) const {
  VecX g(3);
  g << s(0), 2.0 * s(1), s(2);
  return ks_ * rest_.area * g;
}

MatX MembraneTri::raw_hess(const VecX&) const {
  Vec3 d(1.0, 2.0, 1.0);
  return ks_ * rest_.area * MatX(d.asDiagonal());
}

// --- hinge bending ---------------------------------------------------------------

HingeBending::HingeBending(const Hinge& hinge, double rest_angle,
                           double bend_stiffness)
    : ForceTerm({hinge.v[0], hinge.v[1], hinge.v[2], hinge.v[3]}, 1),
      theta0_(rest_angle),
      kb_(bend_stiffness) {}

VecX HingeBending::raw_strain(const Mat3X& xs) const {
  VecX s(1);
  s(0) = dihedral_angle(xs.col(0), xs.col(1), xs.col(2), xs.col(3)) - theta0_;
  return s;
}

MatX HingeBending::raw_jacobian(const Mat3X& xs) const {
  const Vec3 x0 = xs.col(0), x1 = xs.col(1), x2 = xs.col(2), x3 = xs.col(3);
  const Vec3 e = x1 - x0;
  const Vec3 n1 = e.cross(x2 - x0);
  const Vec3 n2 = (x3 - x0).cross(e);
  const double elen2 = e.squaredNorm();
  const double elen = std::sqrt(elen2);
  const Vec3 m1 = elen * n1 / n1.squaredNorm();
  const Vec3 m2 = elen * n2 / n2.squaredNorm();
  const Vec3 g2 = -m1;
  const Vec3 g3 = -m2;
  const Vec3 g0 =
      -((x2 - x1).dot(e) / elen2) * m1 - ((x3 - x1).dot(e) / elen2) * m2;
  const Vec3 g1 =
      ((x2 - x0).dot(e) / elen2) * m1 + ((x3 - x0).dot(e) / elen2) * m2;
  MatX J(1, 12);
  J << g0.transpose(), g1.transpose(), g2.transpose(), g3.transpose();
  return J;
}

double HingeBending::raw_energy(const VecX& s) const {
  return 0.5 * kb_ * s(0) * s(0);
}

VecX HingeBending::raw_grad(const VecX& s) const { return kb_ * s; }

MatX HingeBending::raw_hess(const VecX&) const {
  return MatX::Constant(1, 1, kb_);
}

} // namespace gpbd
