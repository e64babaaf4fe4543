#pragma once

#include "gpbd/energy.hpp"
#include "gpbd/types.hpp"

namespace gpbd {

// Per-force reduced problem: minimize over dlambda in R^k
//   1/2 ||d + W S^T dlambda||^2_{W^-1} + Uhat(s(x + W S^T dlambda)),
// with S the strain Jacobian at the incoming x, held fixed. Coordinates with
// zero inverse mass contribute no displacement and are absent from the norm.
struct LocalProblem {
  const ForceTerm* term = nullptr;
  Mat3X x;  // stencil positions, 3 x m
  VecX d;   // current displacement on the stencil, 3m
  VecX w;   // per-coordinate dt^2 / m entries, 3m (0 = pinned)
  int newton_budget = 1;
  double eps_abs = 1e-10;
  double eps_rel = 1e-6;
};

struct LocalSolution {
  VecX dlambda;       // k
  VecX dd;            // W S^T dlambda on the stencil, 3m
  int iterations = 0;
  bool converged = false;
  double objective_decrease = 0.0;
};

// Exact nonlinear objective; +inf outside the energy's admissible domain.
double local_objective(const LocalProblem& prob, const VecX& dlambda);

// Gradient of the objective and its Gauss-Newton Hessian
//   g = S d + (S W S^T) dlambda + S W S~^T grad Uhat,
//   H = S W S^T + S W S~^T hess Uhat S~ W S^T,
// with S~ the strain Jacobian at the displaced positions.
void local_grad_hess(const LocalProblem& prob, const VecX& dlambda, VecX& g,
                     MatX& H);

// 5 unshifted QR iterations, then the Gershgorin bound on the iterated
// matrix; if the bound is negative, returns H + (|bound| + eps_psd) I applied
// to the original H, else H unchanged.
MatX make_psd(const MatX& H);

// Damped Newton with Armijo backtracking. Compliant terms (k = 1 quadratic
// energies) take a closed-form single step that remains exact at compliance 0.
LocalSolution solve_local(const LocalProblem& prob);

} // namespace gpbd
