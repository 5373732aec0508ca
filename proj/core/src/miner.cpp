#include "treerule/miner.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "treerule/evaluator.hpp"
#include "treerule/util.hpp"

namespace treerule {

namespace {

using PathSig = std::vector<BodyAtom>;
using RuleKey = std::pair<RelationId, PathSig>;

struct Frontier {
    PathSig seq;
    std::vector<std::uint32_t> entities;  // sorted
};

struct Expander {
    std::vector<std::uint8_t> seen;

    explicit Expander(std::uint32_t width) : seen(width, 0) {}

    std::vector<std::uint32_t> hop(const std::vector<std::uint32_t>& src,
                                   const SparseBinaryMatrix& m) {
        std::vector<std::uint32_t> out;
        for (std::uint32_t e : src)
            for (std::uint32_t k : m.row(e))
                if (!seen[k]) {
                    seen[k] = 1;
                    out.push_back(k);
                }
        std::sort(out.begin(), out.end());
        for (std::uint32_t k : out) seen[k] = 0;
        return out;
    }
};

bool intersects(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else return true;
    }
    return false;
}

// Meet-in-the-middle path enumeration for one training fact: forward
// frontiers from the head, backward frontiers from the tail, joined on a
// shared middle entity.
void bbfs_seed(const KnowledgeGraph& kg, const Triple& seed, int max_len, Expander& ex,
               std::set<RuleKey>& out) {
    const int fmax = (max_len + 1) / 2;
    const int bmax = max_len / 2;

    std::vector<std::vector<Frontier>> fw(fmax + 1), bw(bmax + 1);
    fw[0].push_back({{}, {seed.head}});
    bw[0].push_back({{}, {seed.tail}});

    for (int d = 1; d <= fmax; ++d) {
        for (const Frontier& node : fw[d - 1]) {
            for (RelationId r = 0; r < kg.relation_count(); ++r) {
                for (bool inv : {false, true}) {
                    auto next = ex.hop(node.entities, kg.relation_matrix(r, inv));
                    if (next.empty()) continue;
                    Frontier f{node.seq, std::move(next)};
                    f.seq.push_back({r, inv});
                    fw[d].push_back(std::move(f));
                }
            }
        }
    }
    for (int d = 1; d <= bmax; ++d) {
        for (const Frontier& node : bw[d - 1]) {
            for (RelationId r = 0; r < kg.relation_count(); ++r) {
                for (bool inv : {false, true}) {
                    // choosing the suffix atom closest to the frontier and
                    // stepping backward through it
                    auto prev = ex.hop(node.entities, kg.relation_matrix(r, !inv));
                    if (prev.empty()) continue;
                    Frontier f{{BodyAtom{r, inv}}, std::move(prev)};
                    f.seq.insert(f.seq.end(), node.seq.begin(), node.seq.end());
                    bw[d].push_back(std::move(f));
                }
            }
        }
    }

    for (int l = 1; l <= max_len; ++l) {
        const int lf = (l + 1) / 2;
        const int lb = l - lf;
        for (const Frontier& f : fw[lf]) {
            for (const Frontier& b : bw[lb]) {
                if (!intersects(f.entities, b.entities)) continue;
                PathSig seq = f.seq;
                seq.insert(seq.end(), b.seq.begin(), b.seq.end());
                if (l == 1 && seq.front().relation == seed.relation && !seq.front().inverse)
                    continue;  // the head atom itself
                out.insert({seed.relation, std::move(seq)});
            }
        }
    }
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    while (true) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % n;
    }
}

std::vector<Triple> select_seeds(const KnowledgeGraph& kg, const MinerConfig& config) {
    if (!config.sample_facts) return kg.train();
    std::map<RelationId, std::vector<Triple>> by_relation;
    for (const Triple& t : kg.train()) by_relation[t.relation].push_back(t);
    std::vector<Triple> seeds;
    for (auto& [rel, facts] : by_relation) {
        std::mt19937_64 rng(config.seed ^ (0x9e3779b97f4a7c15ull + rel));
        std::size_t keep = std::min(*config.sample_facts, facts.size());
        for (std::size_t i = 0; i < keep; ++i) {
            std::size_t j = i + bounded_draw(rng, facts.size() - i);
            std::swap(facts[i], facts[j]);
        }
        seeds.insert(seeds.end(), facts.begin(), facts.begin() + keep);
    }
    return seeds;
}

}  // namespace

std::vector<Rule> mine(const KnowledgeGraph& kg, const MinerConfig& config) {
    if (config.max_len < 1 || config.max_len > kMaxRuleLength)
        throw std::runtime_error("miner max_len must lie in 1.." + std::to_string(kMaxRuleLength));

    const std::vector<Triple> seeds = select_seeds(kg, config);
    const int workers = resolve_threads(config.threads);

    std::vector<std::set<RuleKey>> partial(workers);
    {
        std::vector<std::thread> pool;
        std::size_t chunk = (seeds.size() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            std::size_t begin = static_cast<std::size_t>(w) * chunk;
            std::size_t end = std::min(seeds.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&, w, begin, end] {
                Expander ex(kg.entity_count());
                for (std::size_t i = begin; i < end; ++i)
                    bbfs_seed(kg, seeds[i], config.max_len, ex, partial[w]);
            });
        }
        for (auto& t : pool) t.join();
    }

    std::set<RuleKey> merged;
    for (auto& s : partial) merged.merge(s);

    std::vector<Rule> rules;
    rules.reserve(merged.size());
    for (const auto& [head, body] : merged) {
        Rule r;
        r.head = head;
        r.body = body;
        rules.push_back(std::move(r));
    }

    std::vector<RuleStats> stats(rules.size());
    parallel_for(rules.size(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) stats[i] = exact_sc(kg, rules[i]);
    });

    std::vector<Rule> kept;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const RuleStats& s = stats[i];
        if (!s.has_sc || s.support < config.min_support || s.sc < config.min_sc) continue;
        rules[i].stats = s;
        kept.push_back(std::move(rules[i]));
    }

    if (config.max_rules_per_head > 0) {
        std::vector<Rule> capped;
        for (std::size_t i = 0; i < kept.size();) {
            std::size_t j = i;
            while (j < kept.size() && kept[j].head == kept[i].head) ++j;
            std::vector<Rule> group(std::make_move_iterator(kept.begin() + i),
                                    std::make_move_iterator(kept.begin() + j));
            std::sort(group.begin(), group.end(), [](const Rule& a, const Rule& b) {
                if (a.stats->sc != b.stats->sc) return a.stats->sc > b.stats->sc;
                if (a.stats->support != b.stats->support) return a.stats->support > b.stats->support;
                return a.body < b.body;
            });
            if (group.size() > config.max_rules_per_head) group.resize(config.max_rules_per_head);
            for (auto& r : group) capped.push_back(std::move(r));
            i = j;
        }
        kept = std::move(capped);
        std::sort(kept.begin(), kept.end(), rule_less);
    }
    return kept;
}

}  // namespace treerule
