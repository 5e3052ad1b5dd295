// Micro-benchmarks for the numerical kernels: change-point segmentation,
// monotone alignment, centrality pooling, similarity matrices, triangle
// correlation and the mixed-model fit.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "invlab/aligner.hpp"
#include "invlab/corpus.hpp"
#include "invlab/inference.hpp"
#include "invlab/pooler.hpp"
#include "invlab/rng.hpp"
#include "invlab/segmenter.hpp"
#include "invlab/simcorr.hpp"

using namespace invlab;

namespace {

SentenceEmbeddingSequence random_sequence(std::uint64_t seed, std::uint32_t n,
                                          std::uint32_t d) {
    Rng rng(seed);
    SentenceEmbeddingSequence seq;
    seq.n = n;
    seq.d = d;
    seq.data.resize(static_cast<std::size_t>(n) * d);
    for (auto& v : seq.data) v = static_cast<float>(rng.gaussian());
    return normalize_rows(seq);
}

void bm_segment(benchmark::State& state) {
    const auto seq =
        random_sequence(1, static_cast<std::uint32_t>(state.range(0)), 16);
    const double bw = median_bandwidth(seq);
    for (auto _ : state) {
        KernelContext ctx(seq, bw);
        PeltOptions opt;
        opt.min_size = 2;
        benchmark::DoNotOptimize(pelt_segment(ctx, opt));
    }
}
BENCHMARK(bm_segment)->Arg(32)->Arg(128)->Arg(512);

void bm_align(benchmark::State& state) {
    const auto n = static_cast<std::uint32_t>(state.range(0));
    const auto a = random_sequence(2, n, 16);
    const auto b = random_sequence(3, n + n / 4, 16);
    for (auto _ : state) benchmark::DoNotOptimize(monotone_align(a, b));
}
BENCHMARK(bm_align)->Arg(32)->Arg(256)->Arg(1024);

void bm_pagerank(benchmark::State& state) {
    const auto seq =
        random_sequence(4, static_cast<std::uint32_t>(state.range(0)), 16);
    const SentenceGraph graph = sentence_graph(seq);
    for (auto _ : state) benchmark::DoNotOptimize(pagerank(graph));
}
BENCHMARK(bm_pagerank)->Arg(32)->Arg(256)->Arg(1024);

void bm_similarity(benchmark::State& state) {
    const auto seq = random_sequence(5, 256, 64);
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(similarity_matrix(seq, threads));
}
BENCHMARK(bm_similarity)->Arg(1)->Arg(4);

void bm_triangle_pearson(benchmark::State& state) {
    const auto a = similarity_matrix(random_sequence(6, 256, 64), 1);
    const auto b = similarity_matrix(random_sequence(7, 256, 64), 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(upper_triangle_pearson(a, b));
}
BENCHMARK(bm_triangle_pearson);

void bm_mixed_model_fit(benchmark::State& state) {
    Rng rng(8);
    const int n_cfg = static_cast<int>(state.range(0));
    std::vector<double> effects(n_cfg);
    for (auto& e : effects) e = 0.1 * rng.gaussian();
    std::vector<FamilyObservation> obs;
    for (int i = 0; i < n_cfg; ++i)
        for (int j = i + 1; j < n_cfg; ++j)
            obs.push_back({0.7 + effects[i] + effects[j] + 0.05 * rng.gaussian(),
                           "c" + std::to_string(i), "c" + std::to_string(j),
                           "OO"});
    for (auto _ : state)
        benchmark::DoNotOptimize(fit_variance_components(obs));
}
BENCHMARK(bm_mixed_model_fit)->Arg(10)->Arg(20)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
