#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "treerule/kg.hpp"
#include "treerule/rule.hpp"

namespace treerule {

/// Exact Standard Confidence over the train split. Groundings are counted
/// as distinct (x_0, x_n) pairs; branch constraints are applied at their
/// anchor variable before the next hop.
RuleStats exact_sc(const KnowledgeGraph& kg, const Rule& rule);

/// The distinct (x_0, x_n) body grounding pairs behind exact_sc's
/// body_count, sorted ascending.
std::vector<std::pair<EntityId, EntityId>> grounding_pairs(const KnowledgeGraph& kg,
                                                           const Rule& rule);

struct KindSummary {
    std::size_t rules = 0;    // rules of this kind seen
    std::size_t defined = 0;  // rules with a defined sc
    double mean_sc = 0.0;     // arithmetic mean over defined rules
    bool present() const { return defined > 0; }
};

/// Per-kind Standard Confidence aggregates. `tree` pools every tree rule;
/// aux/ent/qry cover single-kind tree rules.
struct ScReport {
    std::vector<RuleStats> per_rule;
    KindSummary chain, aux, ent, qry, tree;
};

/// Recomputes exact sc for every rule on this graph and aggregates.
ScReport avg_sc(const KnowledgeGraph& kg, std::span<const Rule> rules, int threads = 0);

/// Distinct unordered connected entity pairs in train facts divided by
/// |E|(|E|-1)/2. Self-loops contribute no pair. Throws when |E| < 2.
double edge_density(const KnowledgeGraph& kg);

}  // namespace treerule
