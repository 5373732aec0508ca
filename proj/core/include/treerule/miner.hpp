#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "treerule/kg.hpp"
#include "treerule/rule.hpp"

namespace treerule {

struct MinerConfig {
    int max_len = 3;               // chain length bound
    std::uint64_t min_support = 2;
    double min_sc = 0.01;
    std::size_t max_rules_per_head = 0;        // 0 = unlimited
    std::optional<std::size_t> sample_facts;   // seed facts per head relation
    std::uint64_t seed = 37;
    int threads = 0;
};

/// Mines all chain rules up to max_len by bidirectional BFS over training
/// facts: for every (sampled) fact (h, r, t), relation paths from h to t
/// are enumerated meet-in-the-middle, lifted to variable-only chains with
/// head r, deduplicated, scored exactly and thresholded. The trivial rule
/// whose body is the head atom itself is never emitted. Output is sorted
/// by (head, body signature).
std::vector<Rule> mine(const KnowledgeGraph& kg, const MinerConfig& config);

}  // namespace treerule
