#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "mpfc/analysis.hpp"
#include "mpfc/diagnostics.hpp"
#include "mpfc/dynamics.hpp"
#include "mpfc/grid.hpp"
#include "mpfc/scenario.hpp"

using namespace mpfc;

namespace {

ScalarField wave(const GridSpec& g) {
  return ScalarField::sample(g, [](const Point& x) {
    return std::cos(2 * std::numbers::pi * x[0]) * std::sin(4 * std::numbers::pi * x[1]);
  });
}

Scenario make_scenario(int n, ModelKind kind, int n_phases = 2) {
  Geometry g;
  g.kind = n_phases == 3 ? GeometryKind::TripleJunction : GeometryKind::Disk;
  g.center = {0.5, 0.5, 0.0};
  g.radius = 0.3;
  Scenario s = Scenario::baseline(g, kind, n_phases);
  s.grid = GridSpec(2, n);
  s.model.eps = 8.0 / n;
  s.dt = 1.0 / (static_cast<double>(n) * n);
  return s;
}

void BM_Laplacian(benchmark::State& state) {
  const GridSpec g(2, static_cast<int>(state.range(0)));
  const ScalarField f = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(laplacian(f));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.cell_count()));
}
BENCHMARK(BM_Laplacian)->Arg(64)->Arg(256)->Arg(512);

void BM_GradSquared(benchmark::State& state) {
  const GridSpec g(2, static_cast<int>(state.range(0)));
  const ScalarField f = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(grad_squared(f));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.cell_count()));
}
BENCHMARK(BM_GradSquared)->Arg(256);

void BM_Integrate(benchmark::State& state) {
  const GridSpec g(2, static_cast<int>(state.range(0)));
  const ScalarField f = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(integrate(f));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.cell_count()));
}
BENCHMARK(BM_Integrate)->Arg(256)->Arg(512);

void BM_Helmholtz(benchmark::State& state) {
  const GridSpec g(2, static_cast<int>(state.range(0)));
  HelmholtzSolver solver(g);
  const ScalarField rhs = wave(g);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(rhs, 1.0, 1e-4));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.cell_count()));
}
BENCHMARK(BM_Helmholtz)->Arg(64)->Arg(256)->Arg(512);

void BM_Rhs(benchmark::State& state) {
  const auto kind = static_cast<ModelKind>(state.range(0));
  const Scenario s = make_scenario(256, kind, 3);
  const PhaseField u = build_scenario(s);
  for (auto _ : state) benchmark::DoNotOptimize(rhs(u, s.model));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Rhs)->DenseRange(0, 3);

void BM_Step(benchmark::State& state) {
  const Scheme scheme = state.range(1) == 0 ? Scheme::IMEX : Scheme::ExplicitEuler;
  const Scenario s = make_scenario(static_cast<int>(state.range(0)), ModelKind::MeanShift);
  Stepper stepper(s.grid, s.model, scheme == Scheme::IMEX ? s.dt : s.dt / 8, scheme, Projection::EveryStep);
  PhaseField u = build_scenario(s);
  for (auto _ : state) u = stepper.advance(u);
  state.SetLabel(std::string(to_string(scheme)));
}
BENCHMARK(BM_Step)->Args({128, 0})->Args({256, 0})->Args({256, 1});

void BM_SampleMeasures(benchmark::State& state) {
  const Scenario s = make_scenario(256, ModelKind::MeanShift);
  const PhaseField u = build_scenario(s);
  for (auto _ : state) benchmark::DoNotOptimize(sample_measures(u, s.model));
}
BENCHMARK(BM_SampleMeasures);

void BM_MonotonicitySample(benchmark::State& state) {
  const Scenario s = make_scenario(256, ModelKind::MeanShift);
  const PhaseField u = build_scenario(s);
  KernelSpec k;
  k.center = {0.5, 0.5, 0.0};
  k.terminal_s = 0.05;
  for (auto _ : state) benchmark::DoNotOptimize(monotonicity_sample(u, s.model, k));
}
BENCHMARK(BM_MonotonicitySample);

}  // namespace

BENCHMARK_MAIN();
