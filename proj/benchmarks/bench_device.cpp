#include <benchmark/benchmark.h>

#include "nanosim/device.hpp"

using namespace nanosim;

namespace {

const ModelConfig kConfig{};
const CntfetParams kN = make_cntfet_params(Polarity::N, Chirality(19, 0), 3);
const CntfetParams kP = make_cntfet_params(Polarity::P, Chirality(19, 0), 3);

void BM_ParamDerivation(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            make_cntfet_params(Polarity::N, Chirality(19, 0), 3, kConfig));
    }
}
BENCHMARK(BM_ParamDerivation);

void BM_EvalSaturation(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(eval_cntfet(kN, 0.9, 0.9, 300.0, kConfig));
}
BENCHMARK(BM_EvalSaturation);

void BM_EvalTriode(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(eval_cntfet(kN, 0.9, 0.1, 300.0, kConfig));
}
BENCHMARK(BM_EvalTriode);

void BM_EvalSubthreshold(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(eval_cntfet(kN, 0.1, 0.9, 300.0, kConfig));
}
BENCHMARK(BM_EvalSubthreshold);

void BM_EvalPType(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(eval_cntfet(kP, -0.9, -0.9, 300.0, kConfig));
}
BENCHMARK(BM_EvalPType);

void BM_EvalReverse(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(eval_cntfet(kN, 0.9, -0.45, 300.0, kConfig));
}
BENCHMARK(BM_EvalReverse);

}  // namespace

BENCHMARK_MAIN();
