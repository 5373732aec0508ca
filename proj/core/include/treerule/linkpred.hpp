#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "treerule/kg.hpp"
#include "treerule/rule.hpp"

namespace treerule {

enum class QueryDirection { Tail, Head };  // (h, r, ?) vs (?, r, t)

struct Query {
    EntityId known = 0;
    RelationId relation = 0;
    QueryDirection direction = QueryDirection::Tail;
    EntityId truth = 0;
};

/// Both directions for every test triple.
std::vector<Query> make_queries(const KnowledgeGraph& kg);

/// A predicted entity with the descending confidences of the rules that
/// fired for it.
struct RankedCandidate {
    EntityId entity = 0;
    std::vector<double> scores;
};

/// Max-aggregation order: compare descending confidence lists
/// lexicographically (missing entries rank lowest, so more firing rules
/// win on a prefix tie); final key is ascending entity id.
bool candidate_better(const RankedCandidate& a, const RankedCandidate& b);

/// Rules indexed by head relation; confidences resolved once up front.
class RuleIndex {
public:
    RuleIndex(const KnowledgeGraph& kg, std::span<const Rule> rules, int threads = 0);
    const std::vector<std::size_t>& for_relation(RelationId r) const;
    const Rule& rule(std::size_t i) const { return rules_[i]; }
    double confidence(std::size_t i) const { return confidence_[i]; }
    std::size_t size() const { return rules_.size(); }

private:
    std::vector<Rule> rules_;
    std::vector<double> confidence_;
    std::vector<std::vector<std::size_t>> by_relation_;
    std::vector<std::size_t> empty_;
};

/// Grounds every matching rule from the query's known entity and returns
/// the candidates best-first.
std::vector<RankedCandidate> apply_rules(const KnowledgeGraph& kg, const RuleIndex& index,
                                         const Query& query);

struct MetricSlice {
    double mrr = 0, hits1 = 0, hits3 = 0, hits10 = 0;  // percent
    double coverage = 0;                                // percent of queries with >=1 prediction
    std::size_t query_count = 0;
};

struct EvalReport {
    MetricSlice all, tail, head;
};

struct EvalOptions {
    bool filtered = true;  // unfiltered kept as an internal sanity mode
    int threads = 0;
    std::size_t explain_top = 10;
};

/// Filtered link prediction over the test split: candidates (other than
/// the truth) forming known true triples in train ∪ valid ∪ test are
/// removed before ranking; absent truth contributes reciprocal rank 0.
EvalReport evaluate(const KnowledgeGraph& kg, const RuleIndex& index,
                    const EvalOptions& options = {},
                    std::vector<std::string>* explanations = nullptr);

}  // namespace treerule
