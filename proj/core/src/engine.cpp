#include "gpbd/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace gpbd {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int threads = std::min(thread_count(), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace

int thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("GPBD_NUM_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    return 1;
  }();
  return n;
}

void DisplacementLedger::reset(
    const std::vector<std::unique_ptr<ForceTerm>>& terms) {
  d.resize(terms.size());
  for (size_t i = 0; i < terms.size(); ++i)
    d[i] = VecX::Zero(3 * terms[i]->stencil_size());
}

double DisplacementLedger::invariant_residual(
    const ParticleSystem& ps,
    const std::vector<std::unique_ptr<ForceTerm>>& terms) const {
  std::vector<Vec3> acc(ps.size(), Vec3::Zero());
  for (size_t i = 0; i < terms.size(); ++i) {
    const auto& st = terms[i]->stencil();
    for (size_t a = 0; a < st.size(); ++a)
      acc[st[a]] += d[i].segment<3>(3 * a);
  }
  double res = 0.0;
  for (int j = 0; j < ps.size(); ++j) {
    const Vec3 diff = ps.x[j] - ps.x_tilde[j] - acc[j];
    res = std::max(res, diff.cwiseAbs().maxCoeff());
  }
  return res;
}

Engine::Engine(ParticleSystem ps, std::vector<std::unique_ptr<ForceTerm>> terms,
               SolverConfig cfg)
    : ps_(std::move(ps)), terms_(std::move(terms)), cfg_(cfg) {
  if (cfg_.gpbd_iterations < 1)
    throw std::invalid_argument("gpbd_iterations must be >= 1");
  if (cfg_.omega < 1.0 || cfg_.omega >= 2.0)
    throw std::invalid_argument("omega must lie in [1, 2)");
  ps_.x_tilde = ps_.x;
  if (!terms_.empty()) {
    std::vector<std::vector<int>> stencils;
    stencils.reserve(terms_.size());
    for (const auto& t : terms_) stencils.push_back(t->stencil());
    coloring_ = color_elements(stencils);
  }
  term_degree_.assign(ps_.size(), 0);
  for (const auto& t : terms_)
    for (int v : t->stencil()) term_degree_[v] += 1;
  ledger_.reset(terms_);
}

void Engine::predict(double h, const std::vector<Vec3>& f_ext) {
  for (int j = 0; j < ps_.size(); ++j) {
    const double w = ps_.inv_mass[j];
    Vec3 xt = ps_.x[j];
    if (w > 0.0) {
      xt += h * ps_.v[j];
      if (!f_ext.empty()) xt += h * h * w * f_ext[j];
    }
    ps_.x_tilde[j] = xt;
    ps_.x[j] = xt;
  }
  ledger_.reset(terms_);
}

void Engine::solve_one(int term_idx, double h, VecX& dd_out, VecX& pd_out) {
  const ForceTerm& term = *terms_[term_idx];
  const auto& st = term.stencil();
  LocalProblem prob;
  prob.term = &term;
  prob.x = gather_positions(ps_.x, st);
  pd_out = VecX::Zero(3 * st.size());
  if (term.needs_admissible_start()) {
    VecX masses(st.size());
    for (size_t a = 0; a < st.size(); ++a) {
      const double w = ps_.inv_mass[st[a]];
      masses(a) = w > 0.0 ? 1.0 / w : 0.0;
    }
    const Mat3X fixed = term.project_admissible(prob.x, masses);
    for (int c = 0; c < prob.x.cols(); ++c)
      pd_out.segment<3>(3 * c) = fixed.col(c) - prob.x.col(c);
    prob.x = fixed;
  }
  prob.d = ledger_.d[term_idx];
  prob.w.resize(3 * st.size());
  for (size_t a = 0; a < st.size(); ++a) {
    const double w = h * h * ps_.inv_mass[st[a]];
    prob.w.segment<3>(3 * a).setConstant(w);
  }
  prob.newton_budget = cfg_.newton_budget;
  prob.eps_abs = cfg_.eps_abs;
  prob.eps_rel = cfg_.eps_rel;
  const LocalSolution sol = solve_local(prob);
  dd_out = sol.dd;
}

void Engine::sweep_gauss_seidel(double h) {
  std::vector<VecX> dds, pds;
  for (const auto& cls : coloring_.classes) {
    dds.resize(cls.size());
    pds.resize(cls.size());
    // stencils within a color are disjoint: parallel result == serial
    parallel_for(static_cast<int>(cls.size()),
                 [&](int i) { solve_one(cls[i], h, dds[i], pds[i]); });
    for (size_t i = 0; i < cls.size(); ++i) {
      const int e = cls[i];
      const auto& st = terms_[e]->stencil();
      ledger_.d[e] += dds[i];
      for (size_t a = 0; a < st.size(); ++a) {
        const int v = st[a];
        // hard-projection displacement is an external impulse: x_tilde
        // follows it so the ledger invariant survives
        ps_.x[v] += pds[i].segment<3>(3 * a) + dds[i].segment<3>(3 * a);
        ps_.x_tilde[v] += pds[i].segment<3>(3 * a);
      }
    }
  }
}

void Engine::sweep_jacobi(double h) {
  const int n = static_cast<int>(terms_.size());
  std::vector<VecX> dds(n), pds(n);
  // all local solves see the same pre-sweep x
  parallel_for(n, [&](int i) { solve_one(i, h, dds[i], pds[i]); });

  // deterministic reduction in term order; the same per-vertex factor
  // omega/degree is applied to d_i so the ledger invariant is exact
  for (int e = 0; e < n; ++e) {
    const auto& st = terms_[e]->stencil();
    for (size_t a = 0; a < st.size(); ++a) {
      const int v = st[a];
      const double factor = cfg_.omega / term_degree_[v];
      const Vec3 incr = factor * dds[e].segment<3>(3 * a);
      const Vec3 proj = factor * pds[e].segment<3>(3 * a);
      ledger_.d[e].segment<3>(3 * a) += incr;
      ps_.x[v] += proj + incr;
      ps_.x_tilde[v] += proj;
    }
  }
}

void Engine::apply_projections() {
  if (!project_) return;
  std::vector<Vec3> before = ps_.x;
  project_(ps_);
  // absorb the projection displacement into x_tilde (external impulse)
  for (int j = 0; j < ps_.size(); ++j)
    ps_.x_tilde[j] += ps_.x[j] - before[j];
}

void Engine::check_finite() const {
  for (int j = 0; j < ps_.size(); ++j) {
    if (!ps_.x[j].allFinite() || !ps_.v[j].allFinite())
      throw std::runtime_error("non-finite state at vertex " +
                               std::to_string(j));
  }
}

void Engine::step() {
  const double h = cfg_.dt / cfg_.substeps;
  std::vector<Vec3> f_ext;
  for (int sub = 0; sub < cfg_.substeps; ++sub) {
    f_ext.assign(ps_.size(), Vec3::Zero());
    if (external_force_) external_force_(ps_, f_ext);
    const std::vector<Vec3> x_prev = ps_.x;
    predict(h, f_ext);
    apply_projections(); // admissible start (inversion fix, pins)
    for (int it = 0; it < cfg_.gpbd_iterations; ++it) {
      const double t0 = now_seconds();
      if (cfg_.mode == ScheduleMode::GaussSeidel)
        sweep_gauss_seidel(h);
      else
        sweep_jacobi(h);
      const double t1 = now_seconds();
      apply_projections();
      const double t2 = now_seconds();

      SweepRecord rec;
      rec.step = step_count_;
      rec.substep = sub;
      rec.sweep = it;
      rec.residual = ledger_.invariant_residual(ps_, terms_);
      rec.max_penetration =
          penetration_probe_ ? penetration_probe_(ps_) : 0.0;
      rec.energy = elastic_energy() + kinetic_energy();
      rec.t_solve = t1 - t0;
      rec.t_project = t2 - t1;
      metrics_.push_back(rec);
    }
    const double decay = std::max(0.0, 1.0 - cfg_.damping * h);
    for (int j = 0; j < ps_.size(); ++j) {
      ps_.v[j] = (ps_.x[j] - x_prev[j]) / h;
      ps_.v[j] *= decay;
    }
  }
  check_finite();
  ++step_count_;
}

double Engine::elastic_energy() const {
  double e = 0.0;
  for (const auto& term : terms_) {
    const Mat3X xs = gather_positions(ps_.x, term->stencil());
    const VecX s = term->strain(xs);
    if (!term->strain_admissible(s)) return std::nan("");
    e += term->full_energy(xs);
  }
  return e;
}

double Engine::kinetic_energy() const {
  double e = 0.0;
  for (int j = 0; j < ps_.size(); ++j) {
    const double w = ps_.inv_mass[j];
    if (w > 0.0) e += 0.5 * ps_.v[j].squaredNorm() / w;
  }
  return e;
}

} // namespace gpbd
