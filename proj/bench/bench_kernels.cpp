// Serial reference path against the OpenMP path for the two hot kernels.

#include <benchmark/benchmark.h>

#include <cmath>

#include "levylab/core/exec.hpp"
#include "levylab/levy/levy_model.hpp"
#include "levylab/nonlocal/generator.hpp"
#include "levylab/sde/simulator.hpp"

using namespace levylab;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& state) {
    state.SetLabel(state.range(0) ? "openmp x" + std::to_string(thread_count()) : "serial");
}

const nonlocal::JumpKernel& sine_kernel() {
    static const auto k = nonlocal::JumpKernel::of_x([](std::span<const double> x) { return 2.0 + std::sin(x[0]); }, 1.0,
                                                     3.0, 1.0, 1.0);
    return k;
}

void BM_GeneratorQuadrature(benchmark::State& state) {
    const lp::GridSpec grid{1, static_cast<std::size_t>(state.range(1)), 2.0 * M_PI};
    const nonlocal::Generator gen(levy::LevyModel::stable_like(0.75, levy::SphericalMeasure::cylindrical(1)), grid);
    const auto u = lp::GridField::from_function(grid, [](std::span<const double> x) { return std::cos(x[0]) + 0.3 * std::sin(5 * x[0]); });
    gen.nodes();
    for (auto _ : state) benchmark::DoNotOptimize(gen.apply_quadrature(u, sine_kernel(), 0.0, exec_of(state)));
    label(state);
}
BENCHMARK(BM_GeneratorQuadrature)->ArgsProduct({{0, 1}, {128, 512}})->Unit(benchmark::kMillisecond);

void BM_CharacteristicFunction(benchmark::State& state) {
    sde::SimConfig cfg;
    cfg.x0 = {0.0};
    cfg.T = 0.1;
    cfg.dt = 0.1;
    cfg.eps = 1e-3;
    cfg.n_paths = static_cast<std::size_t>(state.range(1));
    cfg.exec = exec_of(state);
    const sde::Simulator sim(levy::LevyModel::pure_stable(0.5, levy::SphericalMeasure::cylindrical(1)),
                             nonlocal::JumpKernel::constant(1.0), nonlocal::DriftField::constant({0.0}), cfg);
    const std::vector<double> xi{1.0};
    for (auto _ : state) benchmark::DoNotOptimize(sde::characteristic_function(sim, xi));
    label(state);
}
BENCHMARK(BM_CharacteristicFunction)->ArgsProduct({{0, 1}, {10000}})->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
