#include <benchmark/benchmark.h>

#include <random>

#include "treerule/sparse.hpp"

using namespace treerule;

namespace {

SparseBinaryMatrix make_matrix(std::uint32_t n, std::uint32_t nnz, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
    entries.reserve(nnz);
    for (std::uint32_t i = 0; i < nnz; ++i)
        entries.emplace_back(rng() % n, rng() % n);
    return SparseBinaryMatrix::from_pairs(n, n, std::move(entries));
}

GroundingMatrix make_batch(std::uint32_t n, std::size_t batch, double fill, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    GroundingMatrix g;
    g.width = n;
    g.rows.resize(batch);
    for (auto& row : g.rows)
        for (std::uint32_t e = 0; e < n; ++e)
            if (static_cast<double>(rng() % 1000) < fill * 1000.0) row.push_back(e);
    return g;
}

}  // namespace

static void BM_Hop(benchmark::State& state) {
    const std::uint32_t n = static_cast<std::uint32_t>(state.range(0));
    auto m = make_matrix(n, 8 * n, 1);
    auto v = make_batch(n, 100, 0.02, 2);
    for (auto _ : state) benchmark::DoNotOptimize(hop(v, m));
    state.SetItemsProcessed(state.iterations() * v.rows.size());
}
BENCHMARK(BM_Hop)->Arg(135)->Arg(1000)->Arg(10000);

static void BM_Mask(benchmark::State& state) {
    const std::uint32_t n = static_cast<std::uint32_t>(state.range(0));
    auto a = make_batch(n, 100, 0.05, 3);
    auto b = make_batch(n, 100, 0.05, 4);
    for (auto _ : state) benchmark::DoNotOptimize(mask(a, b));
}
BENCHMARK(BM_Mask)->Arg(135)->Arg(1000)->Arg(10000);

static void BM_ColumnCounts(benchmark::State& state) {
    const std::uint32_t n = static_cast<std::uint32_t>(state.range(0));
    auto a = make_batch(n, 100, 0.05, 5);
    for (auto _ : state) benchmark::DoNotOptimize(column_counts(a));
}
BENCHMARK(BM_ColumnCounts)->Arg(135)->Arg(10000);

BENCHMARK_MAIN();
