#include "treerule/evaluator.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "grounding.hpp"
#include "treerule/util.hpp"

namespace treerule {

namespace detail {

GroundingMatrix ground_body(const KnowledgeGraph& kg, const Rule& rule, const GroundingMatrix& v0) {
    GroundingMatrix v = v0;
    for (std::size_t i = 1; i <= rule.body.size(); ++i) {
        v = hop(v, body_matrix(kg, rule.body[i - 1]));
        for (const BranchAtom& b : rule.branches) {
            if (b.anchor != i) continue;
            switch (b.kind) {
                case BranchKind::Ent: {
                    std::uint32_t e[1] = {b.entity};
                    v = mask_vector(v, e);
                    break;
                }
                case BranchKind::Aux:
                    v = mask_vector(v, aux_entities(kg, b.relation, b.subject_is_anchor));
                    break;
                case BranchKind::Qry:
                    v = mask(v, hop(v0, qry_matrix(kg, b)));
                    break;
            }
        }
    }
    return v;
}

}  // namespace detail

RuleStats exact_sc(const KnowledgeGraph& kg, const Rule& rule) {
    if (rule.body.empty()) throw std::runtime_error("exact_sc: rule with empty body");
    for (const BranchAtom& b : rule.branches)
        if (b.anchor == 0 || b.anchor > rule.body.size())
            throw std::runtime_error("exact_sc: branch anchor out of range");

    const auto candidates = detail::query_candidates(kg, rule);
    const SparseBinaryMatrix& head_m = kg.relation_matrix(rule.head, false);

    std::uint64_t body_count = 0, support = 0;
    constexpr std::size_t kChunk = 512;
    for (std::size_t begin = 0; begin < candidates.size(); begin += kChunk) {
        std::size_t end = std::min(candidates.size(), begin + kChunk);
        GroundingMatrix v0 = GroundingMatrix::one_hot(
            kg.entity_count(), {candidates.data() + begin, candidates.data() + end});
        GroundingMatrix vn = detail::ground_body(kg, rule, v0);
        GroundingMatrix tn = hop(v0, head_m);
        body_count += norm1(vn);
        support += norm1(mask(vn, tn));
    }
    return RuleStats::from_counts(support, body_count);
}

std::vector<std::pair<EntityId, EntityId>> grounding_pairs(const KnowledgeGraph& kg,
                                                           const Rule& rule) {
    const auto candidates = detail::query_candidates(kg, rule);
    std::vector<std::pair<EntityId, EntityId>> pairs;
    constexpr std::size_t kChunk = 512;
    for (std::size_t begin = 0; begin < candidates.size(); begin += kChunk) {
        std::size_t end = std::min(candidates.size(), begin + kChunk);
        GroundingMatrix v0 = GroundingMatrix::one_hot(
            kg.entity_count(), {candidates.data() + begin, candidates.data() + end});
        GroundingMatrix vn = detail::ground_body(kg, rule, v0);
        for (std::size_t i = 0; i < vn.rows.size(); ++i)
            for (EntityId e : vn.rows[i]) pairs.emplace_back(candidates[begin + i], e);
    }
    return pairs;  // candidates ascend and rows are sorted, so pairs are sorted
}

namespace {

struct KindAccumulator {
    std::size_t rules = 0, defined = 0;
    double sum = 0;
    void add(const RuleStats& s) {
        rules++;
        if (s.has_sc) {
            defined++;
            sum += s.sc;
        }
    }
    KindSummary finish() const {
        KindSummary k;
        k.rules = rules;
        k.defined = defined;
        k.mean_sc = defined ? sum / static_cast<double>(defined) : 0.0;
        return k;
    }
};

// Single-kind tree rules feed the per-kind rows; every tree rule feeds the
// pooled TREE row.
std::optional<BranchKind> uniform_kind(const Rule& r) {
    if (r.branches.empty()) return std::nullopt;
    BranchKind k = r.branches.front().kind;
    for (const auto& b : r.branches)
        if (b.kind != k) return std::nullopt;
    return k;
}

}  // namespace

ScReport avg_sc(const KnowledgeGraph& kg, std::span<const Rule> rules, int threads) {
    ScReport report;
    report.per_rule.resize(rules.size());
    parallel_for(rules.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) report.per_rule[i] = exact_sc(kg, rules[i]);
    });

    KindAccumulator chain, aux, ent, qry, tree;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const RuleStats& s = report.per_rule[i];
        if (!rules[i].is_tree()) {
            chain.add(s);
            continue;
        }
        tree.add(s);
        if (auto k = uniform_kind(rules[i])) {
            switch (*k) {
                case BranchKind::Aux: aux.add(s); break;
                case BranchKind::Ent: ent.add(s); break;
                case BranchKind::Qry: qry.add(s); break;
            }
        }
    }
    report.chain = chain.finish();
    report.aux = aux.finish();
    report.ent = ent.finish();
    report.qry = qry.finish();
    report.tree = tree.finish();
    return report;
}

double edge_density(const KnowledgeGraph& kg) {
    const std::uint64_t n = kg.entity_count();
    if (n < 2) throw std::runtime_error("edge_density requires at least two entities");
    std::unordered_set<std::uint64_t> pairs;
    for (const Triple& t : kg.train()) {
        if (t.head == t.tail) continue;
        std::uint64_t lo = std::min(t.head, t.tail), hi = std::max(t.head, t.tail);
        pairs.insert(lo * n + hi);
    }
    return static_cast<double>(pairs.size()) / (static_cast<double>(n) * (n - 1) / 2.0);
}

}  // namespace treerule
