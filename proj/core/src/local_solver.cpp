#include "gpbd/local_solver.hpp"

#include <cmath>
#include <limits>

namespace gpbd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijoC1 = 1e-4;
constexpr int kMaxBacktracks = 20;

Mat3X displaced(const LocalProblem& prob, const VecX& dd) {
  Mat3X xs = prob.x;
  for (int i = 0; i < xs.cols(); ++i)
    xs.col(i) += dd.segment<3>(3 * i);
  return xs;
}

VecX apply_w_st(const LocalProblem& prob, const MatX& S, const VecX& dlambda) {
  return prob.w.cwiseProduct(S.transpose() * dlambda);
}

} // namespace

double local_objective(const LocalProblem& prob, const VecX& dlambda) {
  const MatX S = prob.term->strain_jacobian(prob.x);
  const VecX dd = apply_w_st(prob, S, dlambda);
  const VecX dnew = prob.d + dd;
  double quad = 0.0;
  for (int i = 0; i < dnew.size(); ++i) {
    if (prob.w(i) > 0.0)
      quad += dnew(i) * dnew(i) / prob.w(i);
  }
  const Mat3X xs = displaced(prob, dd);
  const VecX s = prob.term->strain(xs);
  if (!prob.term->strain_admissible(s)) return kInf;
  return 0.5 * quad + prob.term->energy(s);
}

void local_grad_hess(const LocalProblem& prob, const VecX& dlambda, VecX& g,
                     MatX& H) {
  const MatX S = prob.term->strain_jacobian(prob.x);
  const MatX SW = S * prob.w.asDiagonal(); // k x 3m
  const MatX A = SW * S.transpose();       // S W S^T
  const VecX dd = apply_w_st(prob, S, dlambda);
  const Mat3X xs = displaced(prob, dd);
  const MatX St = prob.term->strain_jacobian(xs);
  const VecX s = prob.term->strain(xs);
  const VecX gu = prob.term->energy_grad(s);
  const MatX hu = prob.term->energy_hess(s);
  g = S * prob.d + A * dlambda + SW * (St.transpose() * gu);
  const MatX SWSt = SW * St.transpose(); // k x k
  H = A + SWSt * hu * SWSt.transpose();
}

MatX make_psd(const MatX& H) {
  const int k = static_cast<int>(H.rows());
  if (!H.allFinite())
    throw EnergyDomainError("make_psd: non-finite Hessian entries");

  // Unshifted QR iterations via modified Gram-Schmidt; eigenvalues preserved.
  MatX B = H;
  for (int pass = 0; pass < 5; ++pass) {
    MatX Q = MatX::Zero(k, k);
    MatX R = MatX::Zero(k, k);
    bool ok = true;
    for (int j = 0; j < k && ok; ++j) {
      VecX v = B.col(j);
      for (int i = 0; i < j; ++i) {
        R(i, j) = Q.col(i).dot(v);
        v -= R(i, j) * Q.col(i);
      }
      R(j, j) = v.norm();
      if (R(j, j) <= 1e-300)
        ok = false;
      else
        Q.col(j) = v / R(j, j);
    }
    if (!ok) break; // rank-deficient iterate; Gershgorin on current B
    B = R * Q;
  }

  double bound = kInf;
  for (int i = 0; i < k; ++i) {
    double off = 0.0;
    for (int j = 0; j < k; ++j)
      if (j != i) off += std::abs(B(i, j));
    bound = std::min(bound, B(i, i) - off);
  }
  if (bound >= 0.0) return H;

  double abs_trace = 0.0;
  for (int i = 0; i < k; ++i) abs_trace += std::abs(H(i, i));
  const double eps_psd = 1e-8 * std::max(1.0, abs_trace / k);
  return H + (std::abs(bound) + eps_psd) * MatX::Identity(k, k);
}

namespace {

LocalSolution solve_compliant(const LocalProblem& prob, double alpha) {
  LocalSolution sol;
  sol.dlambda = VecX::Zero(1);
  sol.dd = VecX::Zero(prob.d.size());

  const MatX S = prob.term->strain_jacobian(prob.x);
  const double a = (S * prob.w.asDiagonal() * S.transpose())(0, 0);
  if (!(a > 0.0) || !(alpha + a > 0.0)) return sol; // all-pinned stencil: skip

  const double s0 = prob.term->strain(prob.x)(0);
  const double sd = (S * prob.d)(0);
  // Newton step on the quadratic model, scaled by alpha so the hard limit
  // alpha = 0 stays well defined:
  //   (alpha + a) a dlambda = -(alpha S d + a s)
  sol.dlambda(0) = -(alpha * sd + a * s0) / (a * (alpha + a));
  sol.dd = apply_w_st(prob, S, sol.dlambda);
  sol.iterations = 1;
  sol.converged = true;
  return sol;
}

} // namespace

LocalSolution solve_local(const LocalProblem& prob) {
  if (auto alpha = prob.term->compliance())
    return solve_compliant(prob, *alpha);

  const int k = prob.term->strain_dim();
  LocalSolution sol;
  sol.dlambda = VecX::Zero(k);
  sol.dd = VecX::Zero(prob.d.size());

  double obj = local_objective(prob, sol.dlambda);
  if (!std::isfinite(obj)) return sol; // inadmissible start: skip
  const double obj0 = obj;

  VecX g;
  MatX H;
  double g0_norm = -1.0;
  for (int iter = 0; iter < prob.newton_budget; ++iter) {
    local_grad_hess(prob, sol.dlambda, g, H);
    const double gnorm = g.norm();
    if (g0_norm < 0.0) g0_norm = gnorm;
    if (gnorm <= prob.eps_abs + prob.eps_rel * g0_norm) {
      sol.converged = true;
      break;
    }

    const MatX Hp = make_psd(H);
    Eigen::LDLT<MatX> ldlt(Hp);
    if (ldlt.info() != Eigen::Success) {
      sol.dlambda.setZero();
      sol.dd.setZero();
      sol.converged = false;
      return sol;
    }
    const VecX p = ldlt.solve(-g);
    if (!p.allFinite()) {
      sol.dlambda.setZero();
      sol.dd.setZero();
      sol.converged = false;
      return sol;
    }

    const double slope = g.dot(p);
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      const VecX trial = sol.dlambda + t * p;
      const double trial_obj = local_objective(prob, trial);
      if (trial_obj <= obj + kArmijoC1 * t * slope) {
        sol.dlambda = trial;
        obj = trial_obj;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    sol.iterations = iter + 1;
    if (!accepted) break; // stationary up to line-search resolution
  }
  if (!sol.converged && sol.iterations > 0) {
    // budget- or line-search-limited exit still yields a usable descent state
    sol.converged = true;
  }
  sol.objective_decrease = obj0 - obj;
  const MatX S = prob.term->strain_jacobian(prob.x);
  sol.dd = apply_w_st(prob, S, sol.dlambda);
  return sol;
}

} // namespace gpbd
