#include <benchmark/benchmark.h>

#include "fqhd/diagnostics.hpp"
#include "fqhd/poisson.hpp"
#include "fqhd/stationary.hpp"
#include "fqhd/transient.hpp"

namespace {

fqhd::ScenarioParams npn_scenario(std::size_t n_cells, double eps) {
  fqhd::Grid g(n_cells);
  auto dop = fqhd::DopingProfile::npn(g, 0.6, 1.0, 0.05);
  fqhd::BoundaryData bd{1.0, 1.02, 1.01, 0.99, 0.01};
  return fqhd::ScenarioParams(g, dop, bd, eps, 1.0);
}

void BM_StationarySolve(benchmark::State& state) {
  const auto p = npn_scenario(static_cast<std::size_t>(state.range(0)), 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(fqhd::solve_stationary(p, fqhd::SolverSettings{}));
}
BENCHMARK(BM_StationarySolve)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_PotentialFromDensity(benchmark::State& state) {
  const auto p = npn_scenario(static_cast<std::size_t>(state.range(0)), 0.25);
  const auto n = p.grid.sample([](double x) { return 1.0 + 0.1 * x * (1.0 - x); });
  for (auto _ : state) benchmark::DoNotOptimize(fqhd::potential_from_density(n, p.doping, 0.01, p.grid));
}
BENCHMARK(BM_PotentialFromDensity)->Arg(200)->Arg(400);

template <fqhd::TimeScheme Scheme>
void BM_Step(benchmark::State& state) {
  const auto p = npn_scenario(static_cast<std::size_t>(state.range(0)), 0.25);
  const auto st = fqhd::solve_stationary(p, fqhd::SolverSettings{});
  const auto init = fqhd::compatible_perturbation(fqhd::from_stationary(st), p, 0.01);
  fqhd::StepperConfig cfg;
  cfg.dt = 0.02;
  cfg.scheme = Scheme;
  for (auto _ : state) benchmark::DoNotOptimize(fqhd::step(init, p, cfg));
}
BENCHMARK(BM_Step<fqhd::TimeScheme::implicit_newton>)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Step<fqhd::TimeScheme::picard_frozen>)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_EnergyXi(benchmark::State& state) {
  const auto p = npn_scenario(200, 0.25);
  const auto anchor = fqhd::from_stationary(fqhd::solve_stationary(p, fqhd::SolverSettings{}));
  const auto pert = fqhd::compatible_perturbation(anchor, p, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(fqhd::energy_xi(pert, anchor, p));
}
BENCHMARK(BM_EnergyXi);

}  // namespace

BENCHMARK_MAIN();
