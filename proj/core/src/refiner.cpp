#include "treerule/refiner.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "grounding.hpp"
#include "treerule/evaluator.hpp"
#include "treerule/util.hpp"

namespace treerule {

namespace {

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
    // rejection sampling keeps the draw unbiased and independent of the
    // standard library's distribution implementation
    std::uint64_t threshold = (0 - n) % n;
    while (true) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % n;
    }
}

std::mt19937_64 rule_stream(const KnowledgeGraph& kg, const Rule& rule, std::uint64_t seed) {
    std::uint64_t sig = fnv1a64(rule_signature(rule, kg));
    std::uint64_t mixed = seed ^ (sig + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2));
    return std::mt19937_64(mixed);
}

double clamp_beta(double sc) { return std::min(0.95, std::max(0.05, sc)); }

// An AUX constraint implied by the chain atom entering or leaving the
// anchor holds for every grounding, so it can never discriminate.
bool aux_excluded(const Rule& rule, int anchor, RelationId rel, bool subject_is_anchor) {
    const BodyAtom& entering = rule.body[anchor - 1];
    if (rel == entering.relation && subject_is_anchor == entering.inverse) return true;
    if (anchor < static_cast<int>(rule.body.size())) {
        const BodyAtom& leaving = rule.body[anchor];
        if (rel == leaving.relation && subject_is_anchor == !leaving.inverse) return true;
    }
    return false;
}

// A QRY candidate restating the first chain atom, or the head atom itself,
// is syntactically part of the rule already.
bool qry_excluded(const Rule& rule, int anchor, RelationId rel, bool subject_is_anchor) {
    if (anchor == 1 && rel == rule.body.front().relation &&
        subject_is_anchor == rule.body.front().inverse)
        return true;
    if (anchor == static_cast<int>(rule.body.size()) && rel == rule.head && !subject_is_anchor)
        return true;
    return false;
}

std::uint64_t intersection_size(const std::vector<std::uint32_t>& a,
                                const std::vector<std::uint32_t>& b) {
    std::uint64_t count = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else { ++count; ++ia; ++ib; }
    }
    return count;
}

}  // namespace

GroundingMatrix sample_query_groundings(const KnowledgeGraph& kg, const Rule& rule,
                                        const RefineConfig& config) {
    if (rule.body.empty()) throw std::runtime_error("sample_query_groundings: empty rule body");
    std::vector<std::uint32_t> candidates = detail::query_candidates(kg, rule);
    GroundingMatrix out;
    out.width = kg.entity_count();
    if (candidates.empty()) return out;

    std::mt19937_64 rng = rule_stream(kg, rule, config.seed);
    const std::size_t keep = std::min(config.batch, candidates.size());
    for (std::size_t i = 0; i < keep; ++i) {
        std::size_t j = i + bounded_draw(rng, candidates.size() - i);
        std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(keep);
    return GroundingMatrix::one_hot(kg.entity_count(), candidates);
}

VariableGroundings forward_reason(const KnowledgeGraph& kg, const Rule& rule, GroundingMatrix v0) {
    VariableGroundings g;
    const std::size_t n = rule.body.size();
    g.v.resize(n + 1);
    g.v[0] = std::move(v0);
    for (std::size_t i = 0; i < n; ++i)
        g.v[i + 1] = hop(g.v[i], detail::body_matrix(kg, rule.body[i]));
    g.truth = hop(g.v[0], kg.relation_matrix(rule.head, false));
    return g;
}

std::pair<GroundingMatrix, GroundingMatrix> split_pos_neg(const GroundingMatrix& v_n,
                                                          const GroundingMatrix& t_n) {
    return {mask(v_n, t_n), mask_complement(v_n, t_n)};
}

void backward_reason(const KnowledgeGraph& kg, const Rule& rule, VariableGroundings& g) {
    const std::size_t n = rule.body.size();
    g.p.resize(n + 1);
    g.n.resize(n + 1);
    std::tie(g.p[n], g.n[n]) = split_pos_neg(g.v[n], g.truth);
    for (std::size_t i = n; i-- > 0;) {
        g.p[i] = mask(hop(g.p[i + 1], detail::body_matrix(kg, rule.body[i], /*reverse=*/true)),
                      g.v[i]);
        g.n[i] = mask_complement(g.v[i], g.p[i]);
    }
}

ScoreVector variable_representation(const GroundingMatrix& p, const GroundingMatrix& n,
                                    double beta) {
    if (p.width != n.width)
        throw std::runtime_error("variable_representation: width mismatch");
    CountVector cp = column_counts(p);
    CountVector cn = column_counts(n);
    ScoreVector u(p.width, 0.0);
    for (std::uint32_t e = 0; e < p.width; ++e)
        u[e] = (1.0 - beta) * cp[e] - beta * cn[e];
    return u;
}

std::vector<BranchCandidate> enumerate_candidates(const KnowledgeGraph& kg, const Rule& rule,
                                                  int anchor, const RefineConfig& config,
                                                  const GroundingMatrix& v0,
                                                  const GroundingMatrix& v_anchor) {
    if (anchor < 1 || anchor > static_cast<int>(rule.body.size()))
        throw std::runtime_error("enumerate_candidates: anchor out of range");
    const std::size_t cap = config.max_candidates_per_kind;
    std::vector<BranchCandidate> out;

    if (config.use_ent) {
        CountVector counts = column_counts(v_anchor);
        std::vector<std::uint32_t> active;
        for (std::uint32_t e = 0; e < counts.size(); ++e)
            if (counts[e] > 0) active.push_back(e);
        if (cap && active.size() > cap) {
            std::stable_sort(active.begin(), active.end(), [&](std::uint32_t a, std::uint32_t b) {
                return counts[a] != counts[b] ? counts[a] > counts[b] : a < b;
            });
            active.resize(cap);
            std::sort(active.begin(), active.end());
        }
        for (std::uint32_t e : active) {
            BranchCandidate c;
            c.branch = {BranchKind::Ent, static_cast<std::uint8_t>(anchor), 0, false, e};
            c.constraint = {e};
            out.push_back(std::move(c));
        }
    }

    if (config.use_qry) {
        // forward form only: b(x_i) ⇔ r(x_0, x_i), constraint hop(V0, M_r)
        std::size_t emitted = 0;
        for (RelationId r = 0; r < kg.relation_count() && (!cap || emitted < cap); ++r) {
            if (qry_excluded(rule, anchor, r, /*subject_is_anchor=*/false)) continue;
            BranchCandidate c;
            c.branch = {BranchKind::Qry, static_cast<std::uint8_t>(anchor), r, false, 0};
            c.per_track = hop(v0, detail::qry_matrix(kg, c.branch));
            out.push_back(std::move(c));
            emitted++;
        }
    }

    if (config.use_aux) {
        std::size_t emitted = 0;
        for (RelationId r = 0; r < kg.relation_count() && (!cap || emitted < cap); ++r) {
            for (bool sia : {false, true}) {
                if (cap && emitted >= cap) break;
                if (aux_excluded(rule, anchor, r, sia)) continue;
                BranchCandidate c;
                c.branch = {BranchKind::Aux, static_cast<std::uint8_t>(anchor), r, sia, 0};
                c.constraint = detail::aux_entities(kg, r, sia);
                out.push_back(std::move(c));
                emitted++;
            }
        }
    }
    return out;
}

double score_branch(const GroundingMatrix& p, const GroundingMatrix& n, double beta,
                    const BranchCandidate& candidate) {
    std::uint64_t pos = 0, neg = 0;
    if (candidate.branch.kind == BranchKind::Qry) {
        if (candidate.per_track.rows.size() != p.rows.size())
            throw std::runtime_error("score_branch: track count mismatch");
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
            pos += intersection_size(p.rows[i], candidate.per_track.rows[i]);
            neg += intersection_size(n.rows[i], candidate.per_track.rows[i]);
        }
    } else {
        CountVector cp = column_counts(p);
        CountVector cn = column_counts(n);
        for (std::uint32_t e : candidate.constraint) {
            pos += cp[e];
            neg += cn[e];
        }
    }
    return (1.0 - beta) * static_cast<double>(pos) - beta * static_cast<double>(neg);
}

namespace {

// Same arithmetic as score_branch with the anchor's count vectors reused
// across candidates.
double score_with_counts(const CountVector& cp, const CountVector& cn, const GroundingMatrix& p,
                         const GroundingMatrix& n, double beta, const BranchCandidate& cand) {
    std::uint64_t pos = 0, neg = 0;
    if (cand.branch.kind == BranchKind::Qry) {
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
            pos += intersection_size(p.rows[i], cand.per_track.rows[i]);
            neg += intersection_size(n.rows[i], cand.per_track.rows[i]);
        }
    } else {
        for (std::uint32_t e : cand.constraint) {
            pos += cp[e];
            neg += cn[e];
        }
    }
    return (1.0 - beta) * static_cast<double>(pos) - beta * static_cast<double>(neg);
}

// Exact re-scoring for all selected branches of one base rule. The base
// rule's forward states over the full candidate population are computed
// once per chunk and shared; this is arithmetically identical to running
// exact_sc on each single-branch tree rule.
std::vector<RuleStats> rescore_branches(const KnowledgeGraph& kg, const Rule& base,
                                        const std::vector<BranchAtom>& branches) {
    const auto candidates = detail::query_candidates(kg, base);
    const std::size_t n = base.body.size();
    const SparseBinaryMatrix& head_m = kg.relation_matrix(base.head, false);

    std::vector<std::vector<std::uint32_t>> vec_constraint(branches.size());
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const BranchAtom& b = branches[i];
        if (b.kind == BranchKind::Ent) vec_constraint[i] = {b.entity};
        else if (b.kind == BranchKind::Aux)
            vec_constraint[i] = detail::aux_entities(kg, b.relation, b.subject_is_anchor);
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> counts(branches.size(), {0, 0});
    constexpr std::size_t kChunk = 2048;
    std::vector<GroundingMatrix> levels(n + 1);
    for (std::size_t begin = 0; begin < candidates.size(); begin += kChunk) {
        std::size_t end = std::min(candidates.size(), begin + kChunk);
        levels[0] = GroundingMatrix::one_hot(kg.entity_count(),
                                             {candidates.data() + begin, candidates.data() + end});
        for (std::size_t i = 0; i < n; ++i)
            levels[i + 1] = hop(levels[i], detail::body_matrix(kg, base.body[i]));
        GroundingMatrix truth = hop(levels[0], head_m);

        for (std::size_t bi = 0; bi < branches.size(); ++bi) {
            const BranchAtom& b = branches[bi];
            GroundingMatrix w =
                b.kind == BranchKind::Qry
                    ? mask(levels[b.anchor], hop(levels[0], detail::qry_matrix(kg, b)))
                    : mask_vector(levels[b.anchor], vec_constraint[bi]);
            for (std::size_t j = b.anchor; j < n; ++j)
                w = hop(w, detail::body_matrix(kg, base.body[j]));
            counts[bi].first += norm1(mask(w, truth));
            counts[bi].second += norm1(w);
        }
    }

    std::vector<RuleStats> out(branches.size());
    for (std::size_t i = 0; i < branches.size(); ++i)
        out[i] = RuleStats::from_counts(counts[i].first, counts[i].second);
    return out;
}

}  // namespace

std::vector<Rule> refine_rule(const KnowledgeGraph& kg, const Rule& rule,
                              const RefineConfig& config, RuleRefinement* report) {
    auto skip = [&](const std::string& reason) {
        if (report) {
            report->skipped = true;
            report->skip_reason = reason;
        }
        return std::vector<Rule>{};
    };
    if (rule.is_tree()) return skip("input rule is already tree-like");
    if (rule.body.empty()) return skip("empty body");
    if (config.beta_mode == BetaMode::Fixed &&
        (config.beta_fixed <= 0.0 || config.beta_fixed >= 1.0))
        throw std::runtime_error("fixed beta must lie strictly inside (0,1)");

    RuleStats base = exact_sc(kg, rule);
    if (report) report->base_stats = base;
    if (!base.has_sc) return skip("base rule has no body groundings");

    const double beta =
        config.beta_mode == BetaMode::Fixed ? config.beta_fixed : clamp_beta(base.sc);
    if (report) report->beta = beta;

    GroundingMatrix v0 = sample_query_groundings(kg, rule, config);
    if (v0.rows.empty()) return skip("no entities can ground the query variable");

    VariableGroundings g = forward_reason(kg, rule, std::move(v0));
    backward_reason(kg, rule, g);

    std::vector<BranchAtom> selected;
    std::vector<double> selected_scores;
    for (int anchor = 1; anchor <= static_cast<int>(rule.body.size()); ++anchor) {
        auto candidates = enumerate_candidates(kg, rule, anchor, config, g.v[0], g.v[anchor]);
        const CountVector cp = column_counts(g.p[anchor]);
        const CountVector cn = column_counts(g.n[anchor]);

        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i)
            order.emplace_back(
                score_with_counts(cp, cn, g.p[anchor], g.n[anchor], beta, candidates[i]), i);
        std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return candidates[a.second].branch < candidates[b.second].branch;
        });

        const std::size_t keep = std::min(config.top_k, order.size());
        for (std::size_t k = 0; k < keep; ++k) {
            selected.push_back(candidates[order[k].second].branch);
            selected_scores.push_back(order[k].first);
        }
    }

    std::vector<RuleStats> exact = rescore_branches(kg, rule, selected);
    std::vector<Rule> out;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        bool kept =
            exact[i].has_sc && exact[i].sc > base.sc && exact[i].support >= config.min_support;
        if (report) report->trials.push_back({selected[i], selected_scores[i], exact[i], kept});
        if (kept) {
            Rule tree;
            tree.head = rule.head;
            tree.body = rule.body;
            tree.branches = {selected[i]};
            tree.stats = exact[i];
            out.push_back(std::move(tree));
        }
    }
    return out;
}

std::vector<Rule> refine_rules(const KnowledgeGraph& kg, std::span<const Rule> rules,
                               const RefineConfig& config,
                               std::vector<RuleRefinement>* reports) {
    std::vector<std::vector<Rule>> slots(rules.size());
    std::vector<RuleRefinement> local(rules.size());
    parallel_for(rules.size(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            local[i].rule_index = i;
            slots[i] = refine_rule(kg, rules[i], config, &local[i]);
        }
    });
    std::vector<Rule> out;
    for (auto& s : slots)
        for (auto& r : s) out.push_back(std::move(r));
    if (reports) *reports = std::move(local);
    return out;
}

}  // namespace treerule
