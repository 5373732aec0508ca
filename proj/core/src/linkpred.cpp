#include "treerule/linkpred.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <unordered_map>

#include "grounding.hpp"
#include "treerule/evaluator.hpp"
#include "treerule/util.hpp"

namespace treerule {

std::vector<Query> make_queries(const KnowledgeGraph& kg) {
    std::vector<Query> out;
    out.reserve(kg.test().size() * 2);
    for (const Triple& t : kg.test()) {
        out.push_back({t.head, t.relation, QueryDirection::Tail, t.tail});
        out.push_back({t.tail, t.relation, QueryDirection::Head, t.head});
    }
    return out;
}

bool candidate_better(const RankedCandidate& a, const RankedCandidate& b) {
    const std::size_t len = std::max(a.scores.size(), b.scores.size());
    for (std::size_t i = 0; i < len; ++i) {
        const bool ha = i < a.scores.size(), hb = i < b.scores.size();
        if (ha != hb) return ha;  // more firing rules win a prefix tie
        if (a.scores[i] != b.scores[i]) return a.scores[i] > b.scores[i];
    }
    return a.entity < b.entity;
}

RuleIndex::RuleIndex(const KnowledgeGraph& kg, std::span<const Rule> rules, int threads)
    : rules_(rules.begin(), rules.end()),
      confidence_(rules.size(), 0.0),
      by_relation_(kg.relation_count()) {
    parallel_for(rules_.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Rule& r = rules_[i];
            if (r.stats && r.stats->has_sc) {
                confidence_[i] = r.stats->sc;
            } else {
                RuleStats s = exact_sc(kg, r);
                confidence_[i] = s.has_sc ? s.sc : 0.0;
            }
        }
    });
    for (std::size_t i = 0; i < rules_.size(); ++i)
        if (rules_[i].head < by_relation_.size()) by_relation_[rules_[i].head].push_back(i);
}

const std::vector<std::size_t>& RuleIndex::for_relation(RelationId r) const {
    if (r >= by_relation_.size()) return empty_;
    return by_relation_[r];
}

namespace {

// Entities reached by grounding one rule from the query's known entity.
std::vector<std::uint32_t> ground_query(const KnowledgeGraph& kg, const Rule& rule,
                                        const Query& query) {
    const std::uint32_t known[1] = {query.known};
    if (query.direction == QueryDirection::Tail) {
        GroundingMatrix v0 = GroundingMatrix::one_hot(kg.entity_count(), known);
        return detail::ground_body(kg, rule, v0).rows[0];
    }

    // Head prediction: walk the chain backward applying vector branches at
    // their anchors; QRY branches need x_0, so survivors are verified by a
    // batched forward pass.
    GroundingMatrix b = GroundingMatrix::one_hot(kg.entity_count(), known);
    bool has_qry = false;
    for (std::size_t i = rule.body.size(); i-- > 0;) {
        for (const BranchAtom& br : rule.branches) {
            if (br.anchor != i + 1) continue;
            switch (br.kind) {
                case BranchKind::Ent: {
                    std::uint32_t e[1] = {br.entity};
                    b = mask_vector(b, e);
                    break;
                }
                case BranchKind::Aux:
                    b = mask_vector(b, detail::aux_entities(kg, br.relation, br.subject_is_anchor));
                    break;
                case BranchKind::Qry:
                    has_qry = true;
                    break;
            }
        }
        b = hop(b, detail::body_matrix(kg, rule.body[i], /*reverse=*/true));
    }
    std::vector<std::uint32_t> candidates = b.rows[0];
    if (!has_qry || candidates.empty()) return candidates;

    GroundingMatrix v0 = GroundingMatrix::one_hot(kg.entity_count(), candidates);
    GroundingMatrix vn = detail::ground_body(kg, rule, v0);
    std::vector<std::uint32_t> verified;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (std::binary_search(vn.rows[i].begin(), vn.rows[i].end(), query.known))
            verified.push_back(candidates[i]);
    return verified;
}

std::vector<RankedCandidate> apply_impl(const KnowledgeGraph& kg, const RuleIndex& index,
                                        const Query& query,
                                        std::unordered_map<EntityId, std::size_t>* best_rule) {
    std::unordered_map<EntityId, std::vector<double>> scores;
    for (std::size_t idx : index.for_relation(query.relation)) {
        const double conf = index.confidence(idx);
        for (std::uint32_t e : ground_query(kg, index.rule(idx), query)) {
            auto& list = scores[e];
            list.push_back(conf);
            if (best_rule) {
                auto it = best_rule->find(e);
                if (it == best_rule->end() || conf > index.confidence(it->second))
                    best_rule->insert_or_assign(e, idx);
            }
        }
    }
    std::vector<RankedCandidate> out;
    out.reserve(scores.size());
    for (auto& [e, list] : scores) {
        std::sort(list.begin(), list.end(), std::greater<>());
        out.push_back({e, std::move(list)});
    }
    std::sort(out.begin(), out.end(), candidate_better);
    return out;
}

struct QueryOutcome {
    double rr = 0;
    bool h1 = false, h3 = false, h10 = false;
    bool covered = false;
};

bool filtered_out(const KnowledgeGraph& kg, const Query& q, EntityId e) {
    if (e == q.truth) return false;
    return q.direction == QueryDirection::Tail ? kg.known_fact(q.known, q.relation, e)
                                               : kg.known_fact(e, q.relation, q.known);
}

MetricSlice reduce(const std::vector<QueryOutcome>& outcomes, const std::vector<Query>& queries,
                   std::optional<QueryDirection> dir) {
    MetricSlice s;
    double rr = 0, h1 = 0, h3 = 0, h10 = 0, covered = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (dir && queries[i].direction != *dir) continue;
        s.query_count++;
        rr += outcomes[i].rr;
        h1 += outcomes[i].h1;
        h3 += outcomes[i].h3;
        h10 += outcomes[i].h10;
        covered += outcomes[i].covered;
    }
    if (s.query_count == 0) return s;
    const double n = static_cast<double>(s.query_count);
    s.mrr = 100.0 * rr / n;
    s.hits1 = 100.0 * h1 / n;
    s.hits3 = 100.0 * h3 / n;
    s.hits10 = 100.0 * h10 / n;
    s.coverage = 100.0 * covered / n;
    return s;
}

}  // namespace

std::vector<RankedCandidate> apply_rules(const KnowledgeGraph& kg, const RuleIndex& index,
                                         const Query& query) {
    return apply_impl(kg, index, query, nullptr);
}

EvalReport evaluate(const KnowledgeGraph& kg, const RuleIndex& index, const EvalOptions& options,
                    std::vector<std::string>* explanations) {
    const std::vector<Query> queries = make_queries(kg);
    std::vector<QueryOutcome> outcomes(queries.size());
    if (explanations) explanations->assign(queries.size(), {});

    parallel_for(queries.size(), options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t qi = begin; qi < end; ++qi) {
            const Query& q = queries[qi];
            std::unordered_map<EntityId, std::size_t> best_rule;
            auto candidates = apply_impl(kg, index, q, explanations ? &best_rule : nullptr);

            std::size_t rank = 0, surviving = 0;
            bool found = false;
            std::string explain;
            for (const auto& c : candidates) {
                if (options.filtered && filtered_out(kg, q, c.entity)) continue;
                surviving++;
                if (explanations && surviving <= options.explain_top) {
                    char buf[64];
                    std::snprintf(buf, sizeof(buf), "%.6f", c.scores.front());
                    explain += "\n  " + kg.entities().label(c.entity) + "\tsc=" + buf + "\trule=" +
                               rule_signature(index.rule(best_rule.at(c.entity)), kg);
                }
                if (c.entity == q.truth) {
                    rank = surviving;
                    found = true;
                    if (!explanations) break;
                }
            }
            QueryOutcome& o = outcomes[qi];
            o.covered = surviving > 0;
            if (found) {
                o.rr = 1.0 / static_cast<double>(rank);
                o.h1 = rank <= 1;
                o.h3 = rank <= 3;
                o.h10 = rank <= 10;
            }
            if (explanations) {
                const std::string dir = q.direction == QueryDirection::Tail ? "tail" : "head";
                std::string head = q.direction == QueryDirection::Tail
                                       ? kg.entities().label(q.known) + "\t" +
                                             kg.relations().label(q.relation) + "\t?"
                                       : "?\t" + kg.relations().label(q.relation) + "\t" +
                                             kg.entities().label(q.known);
                (*explanations)[qi] = dir + "\t" + head + "\ttruth=" +
                                      kg.entities().label(q.truth) + "\trank=" +
                                      (found ? std::to_string(rank) : "none") + explain;
            }
        }
    });

    EvalReport report;
    report.all = reduce(outcomes, queries, std::nullopt);
    report.tail = reduce(outcomes, queries, QueryDirection::Tail);
    report.head = reduce(outcomes, queries, QueryDirection::Head);
    return report;
}

}  // namespace treerule
