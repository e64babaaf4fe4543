#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gpbd/energy.hpp"
#include "gpbd/local_solver.hpp"
#include "gpbd/mesh.hpp"
#include "gpbd/types.hpp"

namespace gpbd {

struct ParticleSystem {
  std::vector<Vec3> x;
  std::vector<Vec3> v;
  std::vector<double> inv_mass; // 1/kg, 0 = pinned
  std::vector<Vec3> x_tilde;

  int size() const { return static_cast<int>(x.size()); }
  bool pinned(int i) const { return inv_mass[i] == 0.0; }
};

// Per-force displacements d_i on each force's stencil, maintaining
// x = x_tilde + sum_i d_i.
struct DisplacementLedger {
  std::vector<VecX> d; // one 3m-vector per term

  void reset(const std::vector<std::unique_ptr<ForceTerm>>& terms);
  // max_j |x_j - (x_tilde_j + sum d at j)|_inf
  double invariant_residual(const ParticleSystem& ps,
                            const std::vector<std::unique_ptr<ForceTerm>>& terms)
      const;
};

enum class ScheduleMode { GaussSeidel, Jacobi };

struct SolverConfig {
  double dt = 0.01; // full step advanced by step(), s
  int substeps = 1;
  int gpbd_iterations = 3;  // i_G
  int newton_budget = 5;    // i_N
  ScheduleMode mode = ScheduleMode::GaussSeidel;
  double omega = 1.0;   // Jacobi over-relaxation, [1, 2)
  double damping = 0.0; // gamma, 1/s
  double eps_abs = 1e-10;
  double eps_rel = 1e-6;
};

struct SweepRecord {
  int step = 0;
  int substep = 0;
  int sweep = 0;
  double residual = 0.0;        // ledger invariant residual
  double max_penetration = 0.0;
  double energy = 0.0;          // elastic + kinetic
  double t_solve = 0.0;         // seconds
  double t_project = 0.0;
};

// Hard projections run after each sweep; displacement is absorbed into
// x_tilde so the ledger invariant survives.
using ProjectionPass = std::function<void(ParticleSystem&)>;

class Engine {
public:
  Engine(ParticleSystem ps, std::vector<std::unique_ptr<ForceTerm>> terms,
         SolverConfig cfg);

  ParticleSystem& particles() { return ps_; }
  const ParticleSystem& particles() const { return ps_; }
  const std::vector<std::unique_ptr<ForceTerm>>& terms() const {
    return terms_;
  }
  DisplacementLedger& ledger() { return ledger_; }
  const SolverConfig& config() const { return cfg_; }
  SolverConfig& config() { return cfg_; }
  const Coloring& coloring() const { return coloring_; }

  void set_projection_pass(ProjectionPass pass) { project_ = std::move(pass); }
  void set_external_force(
      std::function<void(const ParticleSystem&, std::vector<Vec3>&)> f) {
    external_force_ = std::move(f);
  }
  // Reported by the projection pass for metrics (set by scene runner).
  void set_penetration_probe(std::function<double(const ParticleSystem&)> p) {
    penetration_probe_ = std::move(p);
  }

  // Predict with the substep size h: x = x_tilde = x + h v + h^2 M^-1 f_ext,
  // ledger zeroed.
  void predict(double h, const std::vector<Vec3>& f_ext);

  void sweep_gauss_seidel(double h);
  void sweep_jacobi(double h);

  // Advance by cfg.dt (cfg.substeps substeps of predict / i_G sweeps+
  // projections / velocity update). Throws on non-finite state.
  void step();

  double elastic_energy() const;
  double kinetic_energy() const;

  const std::vector<SweepRecord>& metrics() const { return metrics_; }
  std::vector<SweepRecord>& metrics() { return metrics_; }

private:
  void solve_one(int term_idx, double h, VecX& dd_out, VecX& pd_out);
  void apply_projections();
  void check_finite() const;

  ParticleSystem ps_;
  std::vector<std::unique_ptr<ForceTerm>> terms_;
  SolverConfig cfg_;
  Coloring coloring_;
  std::vector<int> term_degree_; // per-vertex count of covering terms
  DisplacementLedger ledger_;
  ProjectionPass project_;
  std::function<void(const ParticleSystem&, std::vector<Vec3>&)>
      external_force_;
  std::function<double(const ParticleSystem&)> penetration_probe_;
  std::vector<SweepRecord> metrics_;
  int step_count_ = 0;
};

int thread_count(); // GPBD_NUM_THREADS, default 1

} // namespace gpbd
