#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <string>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "treerule/evaluator.hpp"
#include "treerule/refiner.hpp"
#include "treerule/rule.hpp"

using namespace treerule;
using namespace treerule::testing;

namespace {

Rule toy_rule(const KnowledgeGraph& kg) {
    return parse_rule("speak(X,Z) <= live(X,A), lang(A,Z)", kg);
}

RefineConfig cfgdefault() { return RefineConfig{}; }

GroundingMatrix toy_v0(const KnowledgeGraph& kg) {
    std::vector<std::uint32_t> rows = {*kg.entities().find("alice"), *kg.entities().find("bob")};
    return GroundingMatrix::one_hot(kg.entity_count(), rows);
}

}  // namespace

TEST_CASE("sampling draws exactly the entities that satisfy the first atom") {
    auto kg = toy_kg();
    RefineConfig cfg;
    auto v0 = sample_query_groundings(kg, toy_rule(kg), cfg);
    REQUIRE(v0.rows.size() == 2);  // only alice and bob have live edges
    std::vector<std::uint32_t> seen;
    for (const auto& row : v0.rows) {
        REQUIRE(row.size() == 1);
        seen.push_back(row[0]);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<std::uint32_t>{*kg.entities().find("alice"),
                                             *kg.entities().find("bob")});

    SUBCASE("same seed gives the same row order") {
        auto again = sample_query_groundings(kg, toy_rule(kg), cfg);
        CHECK(again.rows == v0.rows);
    }
    SUBCASE("batch of one on a single-candidate graph") {
        auto tiny = single_fact_kg();
        Rule r;
        r.head = *tiny.relations().find("live");
        r.body = {{*tiny.relations().find("live"), true}};
        RefineConfig one;
        one.batch = 1;
        auto v = sample_query_groundings(tiny, r, one);
        REQUIRE(v.rows.size() == 1);
        CHECK(v.rows[0][0] == *tiny.entities().find("italy"));
    }
}

TEST_CASE("forward pass reproduces the hand grounding of the toy graph") {
    auto kg = toy_kg();
    auto italian = *kg.entities().find("italian");
    auto g = forward_reason(kg, toy_rule(kg), toy_v0(kg));
    REQUIRE(g.v.size() == 3);
    CHECK(g.v[2].rows[0] == std::vector<std::uint32_t>{italian});
    CHECK(g.v[2].rows[1] == std::vector<std::uint32_t>{italian});
    CHECK(g.truth.rows[0] == std::vector<std::uint32_t>{italian});  // alice speaks italian
    CHECK(g.truth.rows[1].empty());                                 // bob does not
}

TEST_CASE("inverse atoms equal forward atoms on the transposed graph") {
    std::mt19937_64 rng(55);
    auto kg = random_kg(rng, {.max_entities = 15, .max_relations = 4, .max_triples = 80});
    std::vector<std::array<std::string, 3>> flipped;
    for (const Triple& t : kg.train())
        flipped.push_back({kg.entities().label(t.tail), kg.relations().label(t.relation),
                           kg.entities().label(t.head)});
    auto kg_flipped = KnowledgeGraph::from_labels(flipped);
    REQUIRE(kg_flipped.entity_count() == kg.entity_count());

    Rule r = random_chain_rule(rng, kg, 3);
    r.body[0].inverse = true;
    Rule mirrored;  // same rule against the flipped graph, ids remapped by label
    mirrored.head = *kg_flipped.relations().find(kg.relations().label(r.head));
    for (const auto& atom : r.body)
        mirrored.body.push_back(
            {*kg_flipped.relations().find(kg.relations().label(atom.relation)), !atom.inverse});

    auto labels_of = [](const KnowledgeGraph& k, const std::vector<std::uint32_t>& row) {
        std::set<std::string> s;
        for (auto e : row) s.insert(k.entities().label(e));
        return s;
    };

    for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
        std::uint32_t start[1] = {e};
        auto v = forward_reason(kg, r, GroundingMatrix::one_hot(kg.entity_count(), start));
        std::uint32_t mirrored_start[1] = {
            *kg_flipped.entities().find(kg.entities().label(e))};
        auto w = forward_reason(kg_flipped, mirrored,
                                GroundingMatrix::one_hot(kg.entity_count(), mirrored_start));
        for (std::size_t i = 0; i < v.v.size(); ++i)
            CHECK(labels_of(kg, v.v[i].rows[0]) == labels_of(kg_flipped, w.v[i].rows[0]));
    }
}

TEST_CASE("positive/negative split at the terminal variable") {
    auto kg = toy_kg();
    auto italian = *kg.entities().find("italian");
    auto g = forward_reason(kg, toy_rule(kg), toy_v0(kg));
    auto [p, n] = split_pos_neg(g.v[2], g.truth);
    CHECK(p.rows[0] == std::vector<std::uint32_t>{italian});
    CHECK(p.rows[1].empty());
    CHECK(n.rows[0].empty());
    CHECK(n.rows[1] == std::vector<std::uint32_t>{italian});

    auto [p2, n2] = split_pos_neg(g.v[2], g.v[2]);
    CHECK(norm1(n2) == 0);
    GroundingMatrix empty;
    empty.width = g.v[2].width;
    empty.rows.resize(g.v[2].rows.size());
    auto [p3, n3] = split_pos_neg(g.v[2], empty);
    CHECK(norm1(p3) == 0);
    CHECK(n3.rows == g.v[2].rows);
}

TEST_CASE("backward pass abduces the toy groundings") {
    auto kg = toy_kg();
    auto italy = *kg.entities().find("italy");
    auto g = forward_reason(kg, toy_rule(kg), toy_v0(kg));
    backward_reason(kg, toy_rule(kg), g);
    CHECK(g.p[1].rows[0] == std::vector<std::uint32_t>{italy});  // alice's track
    CHECK(g.p[1].rows[1].empty());
    CHECK(g.n[1].rows[0].empty());
    CHECK(g.n[1].rows[1] == std::vector<std::uint32_t>{italy});  // bob's track
}

TEST_CASE("all-positive tracks propagate with empty negatives") {
    auto kg = tiny_kg();
    Rule r = toy_rule(kg);
    std::vector<std::uint32_t> alice = {*kg.entities().find("alice")};
    auto g = forward_reason(kg, r, GroundingMatrix::one_hot(kg.entity_count(), alice));
    backward_reason(kg, r, g);
    for (std::size_t i = 0; i < g.v.size(); ++i) {
        CHECK(g.p[i].rows == g.v[i].rows);
        CHECK(norm1(g.n[i]) == 0);
    }
}

TEST_CASE("backward pass matches per-track abduction on random graphs") {
    std::mt19937_64 rng(808);
    for (int round = 0; round < 25; ++round) {
        auto kg = random_kg(rng, {.max_entities = 20, .max_relations = 4, .max_triples = 120});
        Rule r = random_chain_rule(rng, kg, 2);
        TripleOracle oracle(kg);

        std::vector<std::uint32_t> tracks;
        for (std::uint32_t e = 0; e < kg.entity_count(); ++e) tracks.push_back(e);
        auto g = forward_reason(kg, r, GroundingMatrix::one_hot(kg.entity_count(), tracks));
        backward_reason(kg, r, g);

        const std::size_t n = r.body.size();
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            // positive instantiations: assignments whose terminal satisfies the head
            std::set<std::pair<std::size_t, EntityId>> positive;
            std::vector<EntityId> stack{tracks[t]};
            auto dfs = [&](auto&& self, std::size_t depth) -> void {
                if (depth == n) {
                    if (oracle.holds(tracks[t], r.head, stack.back()))
                        for (std::size_t i = 0; i <= n; ++i) positive.insert({i, stack[i]});
                    return;
                }
                const auto& next = r.body[depth].inverse
                                       ? oracle.in(r.body[depth].relation, stack.back())
                                       : oracle.out(r.body[depth].relation, stack.back());
                for (EntityId v : next) {
                    stack.push_back(v);
                    self(self, depth + 1);
                    stack.pop_back();
                }
            };
            dfs(dfs, 0);
            for (std::size_t i = 0; i <= n; ++i) {
                for (EntityId e : g.v[i].rows[t]) {
                    const bool in_p = std::binary_search(g.p[i].rows[t].begin(),
                                                         g.p[i].rows[t].end(), e);
                    const bool in_n = std::binary_search(g.n[i].rows[t].begin(),
                                                         g.n[i].rows[t].end(), e);
                    CHECK(in_p == (positive.count({i, e}) > 0));
                    CHECK(in_n == !in_p);  // negatives are the rest of the reachable set
                }
            }
        }
    }
}

TEST_CASE("variable representation combines the count vectors") {
    auto kg = toy_kg();
    auto italy = *kg.entities().find("italy");
    auto g = forward_reason(kg, toy_rule(kg), toy_v0(kg));
    backward_reason(kg, toy_rule(kg), g);
    auto u = variable_representation(g.p[1], g.n[1], 0.5);
    CHECK(u[italy] == doctest::Approx(0.0));  // one positive and one negative track

    GroundingMatrix p, n;
    p.width = n.width = 4;
    p.rows = {{2}, {2}};
    n.rows = {{}, {}};
    auto u2 = variable_representation(p, n, 0.25);
    CHECK(u2[2] == doctest::Approx(0.75 * 2));
    for (double v : u2) CHECK(v >= 0.0);

    n.rows = {{2}, {2}};
    auto u3 = variable_representation(p, n, 0.5);
    CHECK(u3[2] == doctest::Approx(0.0));
}

TEST_CASE("candidate enumeration on the toy graph") {
    auto kg = toy_kg();
    Rule r = toy_rule(kg);
    auto g = forward_reason(kg, r, toy_v0(kg));
    auto italy = *kg.entities().find("italy");
    auto born = *kg.relations().find("bornIn");

    RefineConfig ent_only;
    ent_only.use_aux = ent_only.use_qry = false;
    auto ents = enumerate_candidates(kg, r, 1, ent_only, g.v[0], g.v[1]);
    REQUIRE(ents.size() == 1);  // italy is the only grounding of the intermediate variable
    CHECK(ents[0].branch.kind == BranchKind::Ent);
    CHECK(ents[0].branch.entity == italy);

    RefineConfig aux_only;
    aux_only.use_ent = aux_only.use_qry = false;
    auto auxes = enumerate_candidates(kg, r, 1, aux_only, g.v[0], g.v[1]);
    bool found_born_in = false;
    for (const auto& c : auxes) {
        if (c.branch.relation == born && !c.branch.subject_is_anchor) {
            found_born_in = true;
            CHECK(c.constraint == std::vector<std::uint32_t>{italy});  // incoming bornIn
        }
        // the chain atoms entering/leaving the anchor are excluded
        CHECK_FALSE((c.branch.relation == *kg.relations().find("live") &&
                     !c.branch.subject_is_anchor));
        CHECK_FALSE((c.branch.relation == *kg.relations().find("lang") &&
                     c.branch.subject_is_anchor));
    }
    CHECK(found_born_in);

    RefineConfig qry_only;
    qry_only.use_aux = qry_only.use_ent = false;
    auto qrys = enumerate_candidates(kg, r, 1, qry_only, g.v[0], g.v[1]);
    bool found_qry = false;
    for (const auto& c : qrys) {
        CHECK_FALSE((c.branch.relation == *kg.relations().find("live") &&
                     !c.branch.subject_is_anchor));  // would restate live(X,A)
        if (c.branch.relation == born && !c.branch.subject_is_anchor) {
            found_qry = true;
            CHECK(c.per_track.rows[0] == std::vector<std::uint32_t>{italy});  // alice's track
            CHECK(c.per_track.rows[1].empty());                               // bob's track
        }
    }
    CHECK(found_qry);

    // at the terminal anchor the head atom itself is not a QRY candidate
    auto qry_end = enumerate_candidates(kg, r, 2, qry_only, g.v[0], g.v[2]);
    for (const auto& c : qry_end)
        CHECK_FALSE((c.branch.relation == r.head && !c.branch.subject_is_anchor));
}

TEST_CASE("branch scores on the toy graph match hand counts") {
    auto kg = toy_kg();
    Rule r = toy_rule(kg);
    auto g = forward_reason(kg, r, toy_v0(kg));
    backward_reason(kg, r, g);
    auto italy = *kg.entities().find("italy");
    auto born = *kg.relations().find("bornIn");

    BranchCandidate ent;
    ent.branch = {BranchKind::Ent, 1, 0, false, italy};
    ent.constraint = {italy};
    CHECK(score_branch(g.p[1], g.n[1], 0.5, ent) == doctest::Approx(0.0));

    BranchCandidate qry;
    qry.branch = {BranchKind::Qry, 1, born, false, 0};
    qry.per_track = hop(g.v[0], kg.relation_matrix(born, false));
    CHECK(score_branch(g.p[1], g.n[1], 0.5, qry) == doctest::Approx(0.5));

    BranchCandidate zero;
    zero.branch = {BranchKind::Aux, 1, born, true, 0};
    zero.constraint = {};
    CHECK(score_branch(g.p[1], g.n[1], 0.5, zero) == doctest::Approx(0.0));
}

TEST_CASE("toy refinement emits the bornIn branch with exact sc 1.0") {
    auto kg = toy_kg();
    Rule r = toy_rule(kg);
    RefineConfig cfg;  // defaults: b=100, k=5, beta auto, seed 37
    RuleRefinement report;
    auto trees = refine_rule(kg, r, cfg, &report);

    CHECK(report.base_stats.sc == doctest::Approx(0.5));
    CHECK(report.beta == doctest::Approx(0.5));
    REQUIRE(trees.size() == 1);
    CHECK(trees[0].branches.size() == 1);
    CHECK(trees[0].branches[0].kind == BranchKind::Qry);
    CHECK(trees[0].branches[0].relation == *kg.relations().find("bornIn"));
    CHECK(trees[0].branches[0].anchor == 1);
    CHECK(trees[0].stats->sc == doctest::Approx(1.0));
    CHECK(serialize_rule(trees[0], kg, false) ==
          "speak(X,Z) <= live(X,A), lang(A,Z), bornIn(X,A)");

    SUBCASE("emitted stats equal a fresh exact evaluation") {
        RuleStats fresh = exact_sc(kg, trees[0]);
        CHECK(fresh.support == trees[0].stats->support);
        CHECK(fresh.body_count == trees[0].stats->body_count);
    }
}

TEST_CASE("a rule that is already perfect is never refined") {
    auto kg = tiny_kg();
    Rule r = toy_rule(kg);  // on the 3-triple graph this rule has sc 1.0
    REQUIRE(exact_sc(kg, r).sc == doctest::Approx(1.0));
    RuleRefinement report;
    auto trees = refine_rule(kg, r, cfgdefault(), &report);
    CHECK(trees.empty());
}

TEST_CASE("rules that cannot ground are skipped with a recorded reason") {
    auto kg = KnowledgeGraph::from_labels({{"a", "live", "b"}}, {}, {{"a", "ghost", "b"}});
    Rule r;
    r.head = *kg.relations().find("live");
    r.body = {{*kg.relations().find("ghost"), false}};  // no train facts
    RuleRefinement report;
    auto trees = refine_rule(kg, r, cfgdefault(), &report);
    CHECK(trees.empty());
    CHECK(report.skipped);
    CHECK_FALSE(report.skip_reason.empty());

    Rule tree = parse_rule("live(X,Y) <= live(X,Y), is(b,Y)", kg);
    RuleRefinement report2;
    CHECK(refine_rule(kg, tree, cfgdefault(), &report2).empty());
    CHECK(report2.skipped);  // already tree-like
}

TEST_CASE("beta is clamped for degenerate confidences") {
    auto kg = tiny_kg();
    Rule r = toy_rule(kg);
    RuleRefinement report;
    refine_rule(kg, r, cfgdefault(), &report);
    CHECK(report.beta == doctest::Approx(0.95));  // sc 1.0 clamps down

    RefineConfig fixed;
    fixed.beta_mode = BetaMode::Fixed;
    fixed.beta_fixed = 1.5;
    CHECK_THROWS(refine_rule(kg, r, fixed));
}

TEST_CASE("refinement is deterministic and independent of worker count") {
    std::mt19937_64 rng(4242);
    auto kg = random_kg(rng, {.max_entities = 25, .max_relations = 5, .max_triples = 200});
    std::vector<Rule> rules;
    for (int i = 0; i < 10; ++i) rules.push_back(random_chain_rule(rng, kg, 3));

    RefineConfig one;
    one.threads = 1;
    RefineConfig four;
    four.threads = 4;
    auto a = refine_rules(kg, rules, one);
    auto b = refine_rules(kg, rules, four);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
        CHECK(serialize_rule(a[i], kg) == serialize_rule(b[i], kg));
    }
}

TEST_CASE("pipeline invariants hold across random executions") {
    std::mt19937_64 rng(31337);
    for (int round = 0; round < 60; ++round) {
        auto kg = random_kg(rng, {.max_entities = 20, .max_relations = 5, .max_triples = 120});
        Rule r = random_chain_rule(rng, kg, 3);
        RefineConfig cfg;
        cfg.batch = 1 + draw(rng, 30);
        auto v0 = sample_query_groundings(kg, r, cfg);
        if (v0.rows.empty()) continue;
        auto g = forward_reason(kg, r, std::move(v0));
        backward_reason(kg, r, g);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            CHECK(norm1(mask(g.p[i], g.n[i])) == 0);  // rowwise disjoint
            auto both = mask(g.p[i], g.v[i]);
            CHECK(both.rows == g.p[i].rows);  // P ⊆ V
            auto nn = mask(g.n[i], g.v[i]);
            CHECK(nn.rows == g.n[i].rows);  // N ⊆ V
        }
        // at the terminal variable P and N cover V
        auto uni = mask_complement(g.v.back(), g.p.back());
        CHECK(uni.rows == g.n.back().rows);
    }
}

TEST_CASE("full-population branch scores equal the brute-force objective") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int round = 0; round < 40; ++round) {
        auto kg = random_kg(rng, {.max_entities = 18, .max_relations = 4, .max_triples = 100});
        Rule r = random_chain_rule(rng, kg, 3);
        RefineConfig cfg;
        cfg.batch = kg.entity_count();  // full candidate population
        auto v0 = sample_query_groundings(kg, r, cfg);
        if (v0.rows.empty()) continue;
        std::vector<EntityId> tracks;
        for (const auto& row : v0.rows) tracks.push_back(row[0]);
        auto g = forward_reason(kg, r, std::move(v0));
        backward_reason(kg, r, g);
        const double beta = 0.3;
        for (int anchor = 1; anchor <= r.length(); ++anchor) {
            auto cands = enumerate_candidates(kg, r, anchor, cfg, g.v[0], g.v[anchor]);
            for (std::size_t i = 0; i < cands.size(); i += 1 + draw(rng, 3)) {
                double fast = score_branch(g.p[anchor], g.n[anchor], beta, cands[i]);
                double slow = oracle_branch_score(kg, r, tracks, cands[i].branch, beta);
                CHECK(fast == slow);  // bitwise: both combine integer totals once
                checked++;
            }
        }
    }
    CHECK(checked > 200);
}

TEST_CASE("extreme beta turns selection into count extremes") {
    std::mt19937_64 rng(606);
    int rounds_with_candidates = 0;
    for (int round = 0; round < 30; ++round) {
        auto kg = random_kg(rng, {.max_entities = 15, .max_relations = 4, .max_triples = 90});
        Rule r = random_chain_rule(rng, kg, 2);
        RefineConfig cfg;
        cfg.batch = 50;
        cfg.use_aux = cfg.use_qry = false;
        auto v0 = sample_query_groundings(kg, r, cfg);
        if (v0.rows.empty()) continue;
        auto g = forward_reason(kg, r, std::move(v0));
        backward_reason(kg, r, g);
        auto cands = enumerate_candidates(kg, r, 1, cfg, g.v[0], g.v[1]);
        if (cands.empty()) continue;
        rounds_with_candidates++;
        auto cp = column_counts(g.p[1]);
        auto cn = column_counts(g.n[1]);

        auto best = [&](double beta) {
            std::size_t arg = 0;
            double best_score = -1e300;
            for (std::size_t i = 0; i < cands.size(); ++i) {
                double s = score_branch(g.p[1], g.n[1], beta, cands[i]);
                if (s > best_score) {
                    best_score = s;
                    arg = i;
                }
            }
            return cands[arg].branch.entity;
        };

        std::uint32_t max_cp = 0, min_cn = UINT32_MAX;
        for (const auto& c : cands) {
            max_cp = std::max(max_cp, cp[c.branch.entity]);
            min_cn = std::min(min_cn, cn[c.branch.entity]);
        }
        CHECK(cp[best(0.001)] == max_cp);   // include all positives
        CHECK(cn[best(0.999)] == min_cn);   // exclude all negatives
    }
    CHECK(rounds_with_candidates > 5);
}

TEST_CASE("emitted tree rules ground subsets of their base rules") {
    std::mt19937_64 rng(91);
    for (int round = 0; round < 12; ++round) {
        auto kg = random_kg(rng, {.max_entities = 20, .max_relations = 4, .max_triples = 150});
        Rule r = random_chain_rule(rng, kg, 2);
        auto trees = refine_rule(kg, r, cfgdefault());
        auto base_pairs = oracle_groundings(kg, r).body_pairs;
        for (const Rule& tree : trees) {
            CHECK(tree.stats->sc > exact_sc(kg, r).sc);
            for (const auto& p : oracle_groundings(kg, tree).body_pairs)
                CHECK(base_pairs.count(p) == 1);
        }
    }
}
