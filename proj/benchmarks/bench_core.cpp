#include "tpflow/constraint.hpp"
#include "tpflow/energy.hpp"
#include "tpflow/variation.hpp"

#include <benchmark/benchmark.h>

using namespace tpflow;

static void bench_energy(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SobolevOrder order(1.75);
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve curve = make_perturbed_circle(n, 2, 5, 0.03, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tp_energy(curve, order, grid));
  }
}
BENCHMARK(bench_energy)->Arg(64)->Arg(128)->Arg(256);

static void bench_gradient_density(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SobolevOrder order(1.75);
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve curve = make_perturbed_circle(n, 2, 5, 0.03, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(d_tp(curve, order, grid));
  }
}
BENCHMARK(bench_gradient_density)->Arg(64)->Arg(128)->Arg(256);

static void bench_constrained_gradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SobolevOrder order(1.75);
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve curve = make_perturbed_circle(n, 2, 5, 0.03, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(constrained_gradient(curve, order, grid));
  }
}
BENCHMARK(bench_constrained_gradient)->Arg(64)->Arg(256);

static void bench_retraction(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Curve curve = make_perturbed_circle(n, 2, 5, 0.03, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(retract_to_arclength(curve));
  }
}
BENCHMARK(bench_retraction)->Arg(256);

static void bench_hessian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SobolevOrder order(1.75);
  const QuadratureGrid grid = QuadratureGrid::for_energy(order, n);
  const Curve curve = make_circle(n);
  const TangentBasis basis = tangent_basis(curve, order.s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(constrained_hessian(curve, order, grid, basis));
  }
}
BENCHMARK(bench_hessian)->Arg(64);

BENCHMARK_MAIN();
