#pragma once

#include <memory>
#include <vector>

#include "gpbd/energy.hpp"
#include "gpbd/engine.hpp"
#include "gpbd/types.hpp"

namespace gpbd {

// Verification oracles; single-threaded, determinism over speed.

struct XpbdState {
  std::vector<double> lambda; // per constraint, reset each substep

  void reset(size_t num_constraints) { lambda.assign(num_constraints, 0.0); }
};

// One XPBD projection of constraint i:
//   dlambda = -(c + dt^-2 alpha lambda) / (grad_c^T M^-1 grad_c + dt^-2 alpha)
// Skips when the denominator vanishes (alpha = 0 and all stencil masses
// pinned).
void xpbd_project(const ForceTerm& constraint, ParticleSystem& ps,
                  double& lambda, double dt);

// Full XPBD sweep over all constraints, in order.
void xpbd_sweep(const std::vector<std::unique_ptr<ForceTerm>>& constraints,
                ParticleSystem& ps, XpbdState& state, double dt);

struct NewtonResult {
  std::vector<Vec3> x;
  double residual = 0.0; // |M(x - x_tilde) - dt^2 sum f_i(x)| at exit
  int iterations = 0;
  bool converged = false;
};

// Solves backward Euler M(x - x_tilde) = dt^2 sum f_i(x) by minimizing the
// incremental potential with a PSD-repaired dense Gauss-Newton Hessian and
// line search. x_tilde must already be stored in ps.x_tilde.
NewtonResult newton_backward_euler(
    const ParticleSystem& ps,
    const std::vector<std::unique_ptr<ForceTerm>>& terms, double dt,
    double tol, int max_iterations = 200);

} // namespace gpbd
