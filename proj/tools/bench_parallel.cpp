// Serial reference path vs OpenMP path for the batch kernels.

#include "delaymoc/attractor.hpp"

#include <benchmark/benchmark.h>

using namespace delaymoc;

namespace {

ModelParams params(double f1, double sigma, double tau) {
  return make_params({{"k", 23e17}, {"alpha", 1.7e-4}, {"beta", 0.8e-3}, {"s0", 35.0}, {"vol", 3.5e17},
                      {"f1_sv", f1}, {"f2_sv", 1.0}, {"t_star", 0.0}, {"sigma_sv", sigma}, {"tau_yr", tau}});
}

SimulationOptions short_runs() {
  SimulationOptions o;
  o.horizon = 60000.0;
  o.t_transient = 20000.0;
  o.max_horizon = o.horizon;
  return o;
}

Exec exec_of(const benchmark::State& s) { return s.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

void BM_Sweep(benchmark::State& state) {
  std::vector<double> grid;
  for (int i = 0; i < 16; ++i) grid.push_back(-0.23 + 0.002 * i);
  const ModelParams p = params(-0.21, 11.0, 900.0);
  for (auto _ : state) benchmark::DoNotOptimize(sweep(p, "f1_sv", grid, false, short_runs(), exec_of(state)));
}

void BM_Hysteresis(benchmark::State& state) {
  std::vector<double> grid;
  for (int i = 0; i < 8; ++i) grid.push_back(-0.214 + 0.001 * i);
  const ModelParams p = params(-0.21, 9.0, 850.0);
  for (auto _ : state) benchmark::DoNotOptimize(hysteresis_scan(p, "f1_sv", grid, short_runs(), exec_of(state)));
}

void BM_Probe(benchmark::State& state) {
  const HopfPoint h = locate_hopf_1d(params(-0.21, 11.0, 900.0), "f1_sv", -0.23, -0.208);
  ProbeOptions o;
  o.deltas = {4e-3, 8e-3, 1.6e-2, 3.2e-2};
  o.min_horizon = 50000.0;
  o.max_horizon = 50000.0;
  for (auto _ : state) benchmark::DoNotOptimize(criticality_probe(h, "f1_sv", o, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_Sweep)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Hysteresis)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Probe)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
