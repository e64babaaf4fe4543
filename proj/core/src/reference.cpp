#include "gpbd/reference.hpp"

#include <cmath>
#include <limits>

#include "gpbd/local_solver.hpp"

namespace gpbd {

void xpbd_project(const ForceTerm& constraint, ParticleSystem& ps,
                  double& lambda, double dt) {
  const auto alpha = constraint.compliance();
  if (!alpha || constraint.strain_dim() != 1)
    throw EnergyDomainError("xpbd_project requires a compliant constraint");

  const auto& st = constraint.stencil();
  const Mat3X xs = gather_positions(ps.x, st);
  const double c = constraint.strain(xs)(0);
  const MatX J = constraint.strain_jacobian(xs); // 1 x 3m

  double denom = 0.0;
  for (size_t a = 0; a < st.size(); ++a)
    denom += ps.inv_mass[st[a]] * J.block<1, 3>(0, 3 * a).squaredNorm();
  const double alpha_tilde = *alpha / (dt * dt);
  denom += alpha_tilde;
  if (denom <= 0.0) return; // fully pinned hard constraint: skip

  const double dlambda = -(c + alpha_tilde * lambda) / denom;
  lambda += dlambda;
  for (size_t a = 0; a < st.size(); ++a)
    ps.x[st[a]] +=
        ps.inv_mass[st[a]] * dlambda * J.block<1, 3>(0, 3 * a).transpose();
}

void xpbd_sweep(const std::vector<std::unique_ptr<ForceTerm>>& constraints,
                ParticleSystem& ps, XpbdState& state, double dt) {
  for (size_t i = 0; i < constraints.size(); ++i)
    xpbd_project(*constraints[i], ps, state.lambda[i], dt);
}

namespace {

double incremental_potential(
    const ParticleSystem& ps,
    const std::vector<std::unique_ptr<ForceTerm>>& terms,
    const std::vector<Vec3>& x, double dt) {
  double phi = 0.0;
  for (int j = 0; j < ps.size(); ++j) {
    const double w = ps.inv_mass[j];
    if (w > 0.0) phi += 0.5 * (x[j] - ps.x_tilde[j]).squaredNorm() / w;
  }
  for (const auto& term : terms) {
    const Mat3X xs = gather_positions(x, term->stencil());
    const VecX s = term->strain(xs);
    if (!term->strain_admissible(s))
      return std::numeric_limits<double>::infinity();
    phi += dt * dt * term->full_energy(xs);
  }
  return phi;
}

} // namespace

NewtonResult newton_backward_euler(
    const ParticleSystem& ps,
    const std::vector<std::unique_ptr<ForceTerm>>& terms, double dt,
    double tol, int max_iterations) {
  const int n = ps.size();
  // free-DOF index map; pinned vertices stay fixed at their current position
  std::vector<int> dof(n, -1);
  int nfree = 0;
  for (int j = 0; j < n; ++j)
    if (!ps.pinned(j)) dof[j] = 3 * nfree++;

  NewtonResult result;
  result.x = ps.x;

  auto assemble = [&](const std::vector<Vec3>& x, VecX& grad, MatX* hess) {
    grad.setZero(3 * nfree);
    if (hess) hess->setZero(3 * nfree, 3 * nfree);
    for (int j = 0; j < n; ++j) {
      if (dof[j] < 0) continue;
      const double m = 1.0 / ps.inv_mass[j];
      grad.segment<3>(dof[j]) = m * (x[j] - ps.x_tilde[j]);
      if (hess)
        hess->block<3, 3>(dof[j], dof[j]) = m * Mat3::Identity();
    }
    for (const auto& term : terms) {
      const auto& st = term->stencil();
      const Mat3X xs = gather_positions(x, st);
      const VecX s = term->strain(xs);
      const MatX J = term->strain_jacobian(xs);
      const VecX gu = term->energy_grad(s);
      const VecX g_full = dt * dt * (J.transpose() * gu);
      MatX h_full;
      if (hess) {
        const MatX hu = make_psd(term->energy_hess(s));
        h_full = dt * dt * (J.transpose() * hu * J);
      }
      for (size_t a = 0; a < st.size(); ++a) {
        if (dof[st[a]] < 0) continue;
        grad.segment<3>(dof[st[a]]) += g_full.segment<3>(3 * a);
        if (hess) {
          for (size_t b = 0; b < st.size(); ++b) {
            if (dof[st[b]] < 0) continue;
            hess->block<3, 3>(dof[st[a]], dof[st[b]]) +=
                h_full.block<3, 3>(3 * a, 3 * b);
          }
        }
      }
    }
  };

  auto residual_norm = [&](const std::vector<Vec3>& x) {
    // |M(x - x_tilde) - dt^2 sum f_i(x)| == |grad of incremental potential|
    VecX grad;
    assemble(x, grad, nullptr);
    return grad.norm();
  };

  double phi = incremental_potential(ps, terms, result.x, dt);
  if (!std::isfinite(phi))
    throw EnergyDomainError("newton_backward_euler: inadmissible start");

  VecX grad;
  MatX hess;
  for (int iter = 0; iter < max_iterations; ++iter) {
    result.residual = residual_norm(result.x);
    if (result.residual <= tol) {
      result.converged = true;
      return result;
    }
    assemble(result.x, grad, &hess);
    Eigen::LDLT<MatX> ldlt(hess);
    const VecX p = ldlt.solve(-grad);
    const double slope = grad.dot(p);

    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      std::vector<Vec3> trial = result.x;
      for (int j = 0; j < n; ++j)
        if (dof[j] >= 0) trial[j] += t * p.segment<3>(dof[j]);
      const double trial_phi = incremental_potential(ps, terms, trial, dt);
      if (trial_phi <= phi + 1e-4 * t * slope) {
        result.x = trial;
        phi = trial_phi;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    result.iterations = iter + 1;
    if (!accepted) break;
  }
  result.residual = residual_norm(result.x);
  result.converged = result.residual <= tol;
  return result;
}

} // namespace gpbd
