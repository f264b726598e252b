#include <benchmark/benchmark.h>

#include "nanosim/cells.hpp"
#include "nanosim/netlist.hpp"
#include "nanosim/solver.hpp"

using namespace nanosim;

namespace {

Circuit divider() {
    return parse(
        ".title divider\n.temp 27\nV1 1 0 DC 1\nR1 1 2 1k\nR2 2 0 1k\n.op\n.end\n");
}

Circuit inverter() {
    return parse(
        ".title inverter\n"
        ".temp 27\n"
        "MP1 out in vdd pfet n=19 m=0 tubes=3\n"
        "MN1 out in 0 nfet n=19 m=0 tubes=3\n"
        "VDD vdd 0 DC 0.9\n"
        "VIN in 0 DC 0.45\n"
        ".op\n"
        ".end\n");
}

Circuit inverter_pulse() {
    return parse(
        ".title inverter pulse\n"
        ".temp 27\n"
        "MP1 out in vdd pfet n=19 m=0 tubes=3\n"
        "MN1 out in 0 nfet n=19 m=0 tubes=3\n"
        "CL out 0 2f\n"
        "VDD vdd 0 DC 0.9\n"
        "VIN in 0 PULSE(0 0.9 100p 10p 10p 380p 800p)\n"
        ".end\n");
}

void BM_DcDivider(benchmark::State& state) {
    Circuit c = divider();
    for (auto _ : state) benchmark::DoNotOptimize(dc_operating_point(c));
}
BENCHMARK(BM_DcDivider);

void BM_DcInverter(benchmark::State& state) {
    Circuit c = inverter();
    for (auto _ : state) benchmark::DoNotOptimize(dc_operating_point(c));
}
BENCHMARK(BM_DcInverter);

void BM_TransientInverter(benchmark::State& state) {
    Circuit c = inverter_pulse();
    for (auto _ : state)
        benchmark::DoNotOptimize(run_transient(c, 1e-12, 800e-12));
}
BENCHMARK(BM_TransientInverter)->Unit(benchmark::kMillisecond);

void BM_TransientAdderBench(benchmark::State& state) {
    CellConfig cfg;
    Stimulus stim;
    GeneratedCell cell = generate_proposed_fa(cfg);
    Testbench tb = generate_testbench(cell, cfg, stim);
    // one stimulus period at a coarse step keeps iterations affordable
    for (auto _ : state)
        benchmark::DoNotOptimize(run_transient(tb.circuit, 10e-12, 800e-12));
}
BENCHMARK(BM_TransientAdderBench)->Unit(benchmark::kMillisecond);

void BM_AssembleAdderSystem(benchmark::State& state) {
    CellConfig cfg;
    GeneratedCell cell = generate_proposed_fa(cfg);
    Testbench tb = generate_testbench(cell, cfg, Stimulus{});
    MnaLayout layout = MnaLayout::build(tb.circuit);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.unknown_count());
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_dc_system(tb.circuit, layout, x));
}
BENCHMARK(BM_AssembleAdderSystem);

}  // namespace

BENCHMARK_MAIN();
