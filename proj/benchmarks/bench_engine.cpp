#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <set>
#include <vector>

#include "gpbd/energy.hpp"
#include "gpbd/engine.hpp"
#include "gpbd/local_solver.hpp"
#include "gpbd/mesh.hpp"

using namespace gpbd;

namespace {

struct Rig {
  ParticleSystem ps;
  std::vector<std::unique_ptr<ForceTerm>> terms;
};

Rig cloth_rig(int n) {
  Rig rig;
  const TriMesh mesh = generate_grid_cloth(n, n, 1.0 / (n - 1));
  rig.ps.x = mesh.vertices;
  rig.ps.v.assign(mesh.num_vertices(), Vec3::Zero());
  rig.ps.inv_mass.assign(mesh.num_vertices(), double(mesh.num_vertices()));
  rig.ps.inv_mass[0] = 0.0;
  rig.ps.inv_mass[n - 1] = 0.0;
  rig.ps.x_tilde = rig.ps.x;
  std::set<std::pair<int, int>> edges;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.insert({a, b});
    }
  for (const auto& [a, b] : edges)
    rig.terms.push_back(std::make_unique<DistanceConstraint>(
        a, b, (mesh.vertices[a] - mesh.vertices[b]).norm(), 1e-5));
  return rig;
}

Rig cube_rig(int n, NeoHookeanVariant variant) {
  Rig rig;
  const TetMesh mesh = generate_cube_tets(n, 0.5);
  rig.ps.x = mesh.vertices;
  rig.ps.v.assign(mesh.num_vertices(), Vec3::Zero());
  rig.ps.inv_mass.assign(mesh.num_vertices(), 8.0 * mesh.num_vertices());
  rig.ps.x_tilde = rig.ps.x;
  const NeoHookeanParams lame = lame_from_young_poisson(1e5, 0.45, variant);
  for (const auto& t : mesh.tets) {
    const TetRest rest =
        tet_rest_state(mesh.vertices[t[0]], mesh.vertices[t[1]],
                       mesh.vertices[t[2]], mesh.vertices[t[3]]);
    rig.terms.push_back(std::make_unique<NeoHookeanTet>(
        std::array<int, 4>{t[0], t[1], t[2], t[3]}, rest, lame));
  }
  return rig;
}

SolverConfig base_config(ScheduleMode mode) {
  SolverConfig cfg;
  cfg.dt = 0.005;
  cfg.gpbd_iterations = 2;
  cfg.newton_budget = 8;
  cfg.mode = mode;
  cfg.omega = mode == ScheduleMode::Jacobi ? 1.5 : 1.0;
  return cfg;
}

void bench_step(benchmark::State& state, Rig rig, ScheduleMode mode) {
  const size_t terms = rig.terms.size();
  Engine eng(rig.ps, std::move(rig.terms), base_config(mode));
  eng.set_external_force([](const ParticleSystem& p, std::vector<Vec3>& f) {
    for (int j = 0; j < p.size(); ++j)
      if (p.inv_mass[j] > 0.0) f[j] = Vec3(0, -9.81, 0) / p.inv_mass[j];
  });
  for (auto _ : state) {
    eng.step();
    benchmark::DoNotOptimize(eng.particles().x.data());
  }
  state.counters["terms"] = static_cast<double>(terms);
  state.counters["terms/s"] = benchmark::Counter(
      static_cast<double>(terms) * 2.0, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ClothStepGS(benchmark::State& state) {
  bench_step(state, cloth_rig(static_cast<int>(state.range(0))),
             ScheduleMode::GaussSeidel);
}

void BM_ClothStepJacobi(benchmark::State& state) {
  bench_step(state, cloth_rig(static_cast<int>(state.range(0))),
             ScheduleMode::Jacobi);
}

void BM_CubeStepLog(benchmark::State& state) {
  bench_step(state,
             cube_rig(static_cast<int>(state.range(0)),
                      NeoHookeanVariant::LogBarrier),
             ScheduleMode::Jacobi);
}

void BM_CubeStepStable(benchmark::State& state) {
  bench_step(state,
             cube_rig(static_cast<int>(state.range(0)),
                      NeoHookeanVariant::Stable),
             ScheduleMode::Jacobi);
}

// single-element reduced Newton solve on a perturbed tetrahedron
void BM_LocalTetSolve(benchmark::State& state) {
  const TetRest rest = tet_rest_state(Vec3(0, 0, 0), Vec3(1, 0, 0),
                                      Vec3(0, 1, 0), Vec3(0, 0, 1));
  NeoHookeanTet term({0, 1, 2, 3}, rest,
                     lame_from_young_poisson(1e5, 0.45,
                                             NeoHookeanVariant::Stable));
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  Mat3X xs(3, 4);
  xs.col(0) = Vec3(0, 0, 0);
  xs.col(1) = Vec3(1, 0, 0);
  xs.col(2) = Vec3(0, 1, 0);
  xs.col(3) = Vec3(0, 0, 1);
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 3; ++r) xs(r, c) += u(rng);
  LocalProblem prob;
  prob.term = &term;
  prob.x = xs;
  prob.w = VecX::Constant(12, 2.5e-5);
  prob.d = VecX::Zero(12);
  prob.newton_budget = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const LocalSolution sol = solve_local(prob);
    benchmark::DoNotOptimize(sol.dd.data());
  }
}

} // namespace

BENCHMARK(BM_ClothStepGS)->Arg(17)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClothStepJacobi)->Arg(17)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CubeStepLog)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CubeStepStable)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LocalTetSolve)->Arg(1)->Arg(4)->Arg(8);

BENCHMARK_MAIN();
