// Microbenchmarks for the dense per-pixel passes: entropy, argmax,
// extraction, threshold accumulation and confusion tallies at a
// Cityscapes-like class count.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "eslkit/confidence.hpp"
#include "eslkit/extraction.hpp"
#include "eslkit/map_types.hpp"
#include "eslkit/metrics.hpp"
#include "eslkit/parallel.hpp"
#include "eslkit/rng.hpp"
#include "eslkit/thresholds.hpp"

namespace {

using namespace esl;

ProbMap make_probmap(std::int32_t side, std::int32_t classes) {
    SplitMix rng(17);
    ProbMap map;
    map.height = side;
    map.width = side;
    map.num_classes = classes;
    map.values.resize(static_cast<std::size_t>(side) * side * classes);
    std::vector<double> raw(classes);
    for (std::int64_t p = 0; p < map.pixel_count(); ++p) {
        double sum = 0.0;
        for (std::int32_t c = 0; c < classes; ++c) {
            raw[c] = std::pow(rng.uniform() + 1e-9, 3.0);
            sum += raw[c];
        }
        float* px = map.values.data() + p * classes;
        for (std::int32_t c = 0; c < classes; ++c) {
            px[c] = static_cast<float>(raw[c] / sum);
        }
    }
    return map;
}

void BM_EntropyMap(benchmark::State& state) {
    set_default_jobs(static_cast<int>(state.range(1)));
    const ProbMap map = make_probmap(state.range(0), 19);
    for (auto _ : state) {
        EntropyMap e = entropy_map(map);
        benchmark::DoNotOptimize(e.values.data());
    }
    state.SetItemsProcessed(state.iterations() * map.pixel_count());
    set_default_jobs(0);
}
BENCHMARK(BM_EntropyMap)->Args({256, 1})->Args({512, 1})->Args({512, 2});

void BM_ArgmaxMap(benchmark::State& state) {
    const ProbMap map = make_probmap(state.range(0), 19);
    for (auto _ : state) {
        LabelMap l = argmax_map(map);
        benchmark::DoNotOptimize(l.labels.data());
    }
    state.SetItemsProcessed(state.iterations() * map.pixel_count());
}
BENCHMARK(BM_ArgmaxMap)->Arg(256)->Arg(512);

void BM_AccumulateEntropy(benchmark::State& state) {
    const ProbMap map = make_probmap(state.range(0), 19);
    const EntropyMap ent = entropy_map(map);
    for (auto _ : state) {
        ClassSampleBag bag = ClassSampleBag::make(ConfidenceKind::Entropy, 19);
        accumulate(bag, map, ent);
        benchmark::DoNotOptimize(bag.samples.data());
    }
    state.SetItemsProcessed(state.iterations() * map.pixel_count());
}
BENCHMARK(BM_AccumulateEntropy)->Arg(256)->Arg(512);

void BM_ComputeNu(benchmark::State& state) {
    const ProbMap map = make_probmap(512, 19);
    ClassSampleBag bag = ClassSampleBag::make(ConfidenceKind::Entropy, 19);
    accumulate(bag, map);
    for (auto _ : state) {
        ClassThresholds t = compute_nu(bag, 0.1);
        benchmark::DoNotOptimize(t.values.data());
    }
    state.SetItemsProcessed(state.iterations() * bag.total_samples());
}
BENCHMARK(BM_ComputeNu);

void BM_ExtractEsl(benchmark::State& state) {
    const ProbMap map = make_probmap(state.range(0), 19);
    const EntropyMap ent = entropy_map(map);
    ClassSampleBag bag = ClassSampleBag::make(ConfidenceKind::Entropy, 19);
    accumulate(bag, map, ent);
    const ClassThresholds nu = compute_nu(bag, 0.1);
    for (auto _ : state) {
        PseudoLabelMap out = extract_esl(map, ent, nu);
        benchmark::DoNotOptimize(out.labels.data());
    }
    state.SetItemsProcessed(state.iterations() * map.pixel_count());
}
BENCHMARK(BM_ExtractEsl)->Arg(256)->Arg(512);

void BM_ExtractSsl(benchmark::State& state) {
    const ProbMap map = make_probmap(state.range(0), 19);
    ClassSampleBag bag = ClassSampleBag::make(ConfidenceKind::Softmax, 19);
    accumulate(bag, map);
    const ClassThresholds mu = compute_mu(bag, 0.9);
    for (auto _ : state) {
        PseudoLabelMap out = extract_ssl(map, mu);
        benchmark::DoNotOptimize(out.labels.data());
    }
    state.SetItemsProcessed(state.iterations() * map.pixel_count());
}
BENCHMARK(BM_ExtractSsl)->Arg(256)->Arg(512);

void BM_Confusion(benchmark::State& state) {
    const ProbMap map = make_probmap(state.range(0), 19);
    const LabelMap pred = argmax_map(map);
    SplitMix rng(23);
    LabelMap gt = pred;
    for (auto& v : gt.labels) {
        if (rng.uniform() < 0.2) v = static_cast<std::uint8_t>(rng.uniform() * 19);
    }
    for (auto _ : state) {
        ConfusionMatrix cm = confusion(pred, gt);
        benchmark::DoNotOptimize(cm.counts.data());
    }
    state.SetItemsProcessed(state.iterations() * pred.pixel_count());
}
BENCHMARK(BM_Confusion)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
