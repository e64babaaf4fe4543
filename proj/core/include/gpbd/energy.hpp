#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gpbd/mesh.hpp"
#include "gpbd/types.hpp"

namespace gpbd {

struct EnergyDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class NeoHookeanVariant { LogBarrier, Stable };

struct NeoHookeanParams {
  double mu = 0.0;     // Pa
  double lambda = 0.0; // Pa
  NeoHookeanVariant variant = NeoHookeanVariant::Stable;
};

// mu = E/(2(1+nu)), lambda = E nu/((1+nu)(1-2 nu)). Throws for nu >= 0.5.
NeoHookeanParams lame_from_young_poisson(double young, double poisson,
                                         NeoHookeanVariant variant);

struct ClothParams {
  double stretch_stiffness = 0.0; // k_s, N/m
  double bend_stiffness = 0.0;    // k_b, N*m
  double bend_strain_scale = 1.0; // dimensionless, default l^2
};

// --- element kinematics -----------------------------------------------------

Mat3 tet_deformation_gradient(const Mat3X& xs, const TetRest& rest);
Mat3x2 tri_deformation_gradient(const Mat3X& xs, const TriRest& rest);

// Tets: (e_xx, e_yy, e_zz, e_xy, e_xz, e_yz); triangles: (e_xx, e_xy, e_yy).
VecX green_strain_vector(const Mat3& F);
VecX green_strain_vector(const Mat3x2& F);

// Signed dihedral angle in (-pi, pi) for the hinge stencil
// (e0, e1, v_left, v_right); positive when the faces open away from each
// other. Throws on degenerate triangles.
double dihedral_angle(const Vec3& e0, const Vec3& e1, const Vec3& vl,
                      const Vec3& vr);

// Material energy from the deformation gradient (J). The log-barrier variant
// throws EnergyDomainError when det F <= 0.
double nh_energy(const Mat3& F, double volume, const NeoHookeanParams& p);

// --- force terms -------------------------------------------------------------

// One energy term U(x) = Uhat(s(x)) on a vertex stencil, with a
// k-dimensional strain. All public accessors operate on the scaled strain
// s' = diag(strain_scale) * s_raw; the scaling cancels in S^T grad(Uhat).
class ForceTerm {
public:
  virtual ~ForceTerm() = default;

  const std::vector<int>& stencil() const { return stencil_; }
  int stencil_size() const { return static_cast<int>(stencil_.size()); }
  int strain_dim() const { return k_; }
  const VecX& strain_scale() const { return scale_; }
  void set_strain_scale(const VecX& scale);

  VecX strain(const Mat3X& xs) const;
  MatX strain_jacobian(const Mat3X& xs) const; // k x 3m
  double energy(const VecX& s) const;
  VecX energy_grad(const VecX& s) const;
  MatX energy_hess(const VecX& s) const;
  bool strain_admissible(const VecX& s) const;

  // Full-space energy and force on the stencil (f = -S^T grad Uhat).
  double full_energy(const Mat3X& xs) const;
  VecX full_force(const Mat3X& xs) const;

  // Compliance alpha when Uhat(s) = s^2/(2 alpha) with k = 1; enables the
  // closed-form local update valid down to alpha = 0.
  virtual std::optional<double> compliance() const { return std::nullopt; }

  // Hard geometric precondition enforced right before each local solve.
  // Returns adjusted stencil positions (default: unchanged). Masses are kg;
  // pinned vertices are passed as 0 and treated as immovable-heavy.
  virtual bool needs_admissible_start() const { return false; }
  virtual Mat3X project_admissible(const Mat3X& xs, const VecX& masses) const {
    (void)masses;
    return xs;
  }

protected:
  ForceTerm(std::vector<int> stencil, int k);

  virtual VecX raw_strain(const Mat3X& xs) const = 0;
  virtual MatX raw_jacobian(const Mat3X& xs) const = 0;
  virtual double raw_energy(const VecX& s) const = 0;
  virtual VecX raw_grad(const VecX& s) const = 0;
  virtual MatX raw_hess(const VecX& s) const = 0;
  virtual bool raw_admissible(const VecX&) const { return true; }

  std::vector<int> stencil_;
  int k_;
  VecX scale_;
};

// Linearly compliant distance constraint, c = |x1 - x0| - rest.
class DistanceConstraint final : public ForceTerm {
public:
  DistanceConstraint(int v0, int v1, double rest_length, double compliance);
  std::optional<double> compliance() const override { return alpha_; }
  double rest_length() const { return rest_; }

protected:
  VecX raw_strain(const Mat3X& xs) const override;
  MatX raw_jacobian(const Mat3X& xs) const override;
  double raw_energy(const VecX& s) const override;
  VecX raw_grad(const VecX& s) const override;
  MatX raw_hess(const VecX& s) const override;

private:
  double rest_, alpha_;
};

// Compliant attachment, c = |x - p|.
class PinConstraint final : public ForceTerm {
public:
  PinConstraint(int v, const Vec3& target, double compliance);
  std::optional<double> compliance() const override { return alpha_; }
  void set_target(const Vec3& target) { target_ = target; }
  const Vec3& target() const { return target_; }

protected:
  VecX raw_strain(const Mat3X& xs) const override;
  MatX raw_jacobian(const Mat3X& xs) const override;
  double raw_energy(const VecX& s) const override;
  VecX raw_grad(const VecX& s) const override;
  MatX raw_hess(const VecX& s) const override;

private:
  Vec3 target_;
  double alpha_;
};

// Neo-Hookean tet over the 6-vector Green strain. The reduced energy uses
// tr C = tr(2E + I) and det F = sqrt(det(2E + I)), valid on the det F > 0
// branch (guaranteed by the inversion projection).
class NeoHookeanTet final : public ForceTerm {
public:
  NeoHookeanTet(const std::array<int, 4>& verts, const TetRest& rest,
                const NeoHookeanParams& params);
  const TetRest& rest() const { return rest_; }
  const NeoHookeanParams& params() const { return params_; }

  // Inversion recovery: det F must be positive before the local solve.
  bool needs_admissible_start() const override { return true; }
  Mat3X project_admissible(const Mat3X& xs, const VecX& masses) const override;

protected:
  VecX raw_strain(const Mat3X& xs) const override;
  MatX raw_jacobian(const Mat3X& xs) const override;
  double raw_energy(const VecX& s) const override;
  VecX raw_grad(const VecX& s) const override;
  MatX raw_hess(const VecX& s) const override;
  bool raw_admissible(const VecX& s) const override;

private:
  TetRest rest_;
  NeoHookeanParams params_;
};

// Green-strain membrane: Uhat = 1/2 k_s A (s_xx^2 + s_yy^2 + 2 s_xy^2).
class MembraneTri final : public ForceTerm {
public:
  MembraneTri(const std::array<int, 3>& verts, const TriRest& rest,
              double stretch_stiffness);
  const TriRest& rest() const { return rest_; }

protected:
  VecX raw_strain(const Mat3X& xs) const override;
  MatX raw_jacobian(const Mat3X& xs) const override;
  double raw_energy(const VecX& s) const override;
  VecX raw_grad(const VecX& s) const override;
  MatX raw_hess(const VecX& s) const override;

private:
  TriRest rest_;
  double ks_;
};

// Dihedral hinge bending: Uhat = 1/2 k_b (theta - theta0)^2 over the 1-D
// angle strain.
class HingeBending final : public ForceTerm {
public:
  HingeBending(const Hinge& hinge, double rest_angle, double bend_stiffness);
  double rest_angle() const { return theta0_; }

protected:
  VecX raw_strain(const Mat3X& xs) const override;
  MatX raw_jacobian(const Mat3X& xs) const override;
  double raw_energy(const VecX& s) const override;
  VecX raw_grad(const VecX& s) const override;
  MatX raw_hess(const VecX& s) const override;

private:
  double theta0_, kb_;
};

// Gathers stencil positions into a 3 x m block.
Mat3X gather_positions(const std::vector<Vec3>& x,
                       const std::vector<int>& stencil);

} // namespace gpbd
