#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "treerule/evaluator.hpp"
#include "treerule/kg.hpp"
#include "treerule/refiner.hpp"
#include "treerule/rule.hpp"

using namespace treerule;

namespace {

// UMLS-like synthetic graph: dense, few entities, many relations.
KnowledgeGraph make_graph(std::uint32_t entities, std::uint32_t relations,
                          std::uint32_t triples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::array<std::string, 3>> train;
    train.reserve(triples);
    for (std::uint32_t i = 0; i < triples; ++i)
        train.push_back({"e" + std::to_string(rng() % entities),
                         "r" + std::to_string(rng() % relations),
                         "e" + std::to_string(rng() % entities)});
    return KnowledgeGraph::from_labels(train);
}

Rule make_rule(const KnowledgeGraph& kg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Rule r;
    r.head = static_cast<RelationId>(rng() % kg.relation_count());
    for (int i = 0; i < 2; ++i)
        r.body.push_back({static_cast<RelationId>(rng() % kg.relation_count()), false});
    return r;
}

}  // namespace

static void BM_ExactSc(benchmark::State& state) {
    auto kg = make_graph(135, 46, 5000, 11);
    auto rule = make_rule(kg, 12);
    for (auto _ : state) benchmark::DoNotOptimize(exact_sc(kg, rule));
}
BENCHMARK(BM_ExactSc);

static void BM_RefineRule(benchmark::State& state) {
    auto kg = make_graph(135, 46, 5000, 21);
    auto rule = make_rule(kg, 22);
    RefineConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(refine_rule(kg, rule, cfg));
}
BENCHMARK(BM_RefineRule);

static void BM_ForwardBackward(benchmark::State& state) {
    auto kg = make_graph(135, 46, 5000, 31);
    auto rule = make_rule(kg, 32);
    RefineConfig cfg;
    auto v0 = sample_query_groundings(kg, rule, cfg);
    for (auto _ : state) {
        auto g = forward_reason(kg, rule, v0);
        backward_reason(kg, rule, g);
        benchmark::DoNotOptimize(g);
    }
}
BENCHMARK(BM_ForwardBackward);

BENCHMARK_MAIN();
