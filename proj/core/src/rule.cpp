#include "treerule/rule.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "treerule/util.hpp"

namespace treerule {

const char* branch_kind_name(BranchKind k) {
    switch (k) {
        case BranchKind::Ent: return "ENT";
        case BranchKind::Qry: return "QRY";
        case BranchKind::Aux: return "AUX";
    }
    return "?";
}

RuleStats RuleStats::from_counts(std::uint64_t support, std::uint64_t body_count) {
    RuleStats s;
    s.support = support;
    s.body_count = body_count;
    s.has_counts = true;
    if (body_count > 0) {
        s.sc = static_cast<double>(support) / static_cast<double>(body_count);
        s.has_sc = true;
    }
    return s;
}

bool rule_less(const Rule& a, const Rule& b) {
    if (a.head != b.head) return a.head < b.head;
    if (a.body != b.body) return a.body < b.body;
    return a.branches < b.branches;
}

namespace {

struct ParsedTerm {
    bool is_var = false;
    char var = 0;         // single uppercase letter
    std::string label;    // constant
};

struct ParsedAtom {
    std::string name;
    ParsedTerm lhs, rhs;
};

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("rule parse: " + msg); }

ParsedTerm parse_term(std::string_view raw) {
    auto t = trim(raw);
    if (t.empty()) fail("empty term");
    ParsedTerm out;
    if (t.size() == 1 && t[0] >= 'A' && t[0] <= 'Z') {
        out.is_var = true;
        out.var = t[0];
    } else {
        out.label = std::string(t);
    }
    return out;
}

ParsedAtom parse_atom(std::string_view raw) {
    auto s = trim(raw);
    auto open = s.find('(');
    if (open == std::string_view::npos || s.back() != ')')
        fail("malformed atom `" + std::string(s) + "`");
    ParsedAtom atom;
    atom.name = std::string(trim(s.substr(0, open)));
    if (atom.name.empty()) fail("atom without a relation name");
    auto args = s.substr(open + 1, s.size() - open - 2);
    auto comma = args.find(',');
    if (comma == std::string_view::npos || args.find(',', comma + 1) != std::string_view::npos)
        fail("atom `" + std::string(s) + "` must have exactly two terms");
    atom.lhs = parse_term(args.substr(0, comma));
    atom.rhs = parse_term(args.substr(comma + 1));
    return atom;
}

// Splits on commas that sit outside parentheses.
std::vector<std::string_view> split_atoms(std::string_view body) {
    std::vector<std::string_view> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '(') depth++;
        else if (body[i] == ')') depth--;
        else if (body[i] == ',' && depth == 0) {
            out.push_back(body.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(body.substr(start));
    return out;
}

struct Edge {
    RelationId relation;
    char u, v;  // stored fact direction: (u, relation, v)
};

// Backtracking chain recovery: choose an ordered subset of edges forming a
// simple path start -> ... -> end (edges tried in file order, so canonical
// serializations round-trip); every unused edge must later classify as a
// QRY branch (one endpoint = start variable).
struct ChainSearch {
    const std::vector<Edge>& edges;
    char start, end;
    std::vector<char> path;        // variable sequence
    std::vector<int> chain_edges;  // edge index per path step
    std::vector<bool> used;
    bool found = false;
    int overlong = 0;  // decompositions rejected only by the length bound

    explicit ChainSearch(const std::vector<Edge>& e, char s, char t)
        : edges(e), start(s), end(t), used(e.size(), false) {
        path.push_back(s);
    }

    bool leftovers_are_qry() const {
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (used[i]) continue;
            const Edge& e = edges[i];
            char other;
            if (e.u == start) other = e.v;
            else if (e.v == start) other = e.u;
            else return false;
            auto it = std::find(path.begin() + 1, path.end(), other);
            if (it == path.end()) return false;
        }
        return true;
    }

    bool dfs() {
        char cur = path.back();
        if (cur == end && path.size() >= 2) {
            if (path.size() - 1 > static_cast<std::size_t>(kMaxRuleLength)) {
                if (leftovers_are_qry()) overlong++;
            } else if (leftovers_are_qry()) {
                return true;
            }
            // a longer chain through `end` is never valid: path vars are distinct
            return false;
        }
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (used[i]) continue;
            const Edge& e = edges[i];
            char next;
            if (e.u == cur) next = e.v;
            else if (e.v == cur) next = e.u;
            else continue;
            if (std::find(path.begin(), path.end(), next) != path.end()) continue;
            used[i] = true;
            path.push_back(next);
            chain_edges.push_back(static_cast<int>(i));
            if (dfs()) return true;
            chain_edges.pop_back();
            path.pop_back();
            used[i] = false;
        }
        return false;
    }
};

RelationId intern_relation(const std::string& label, const KnowledgeGraph& kg) {
    auto id = kg.relations().find(label);
    if (!id) fail("unknown relation `" + label + "`");
    return *id;
}

}  // namespace

Rule parse_rule(std::string_view line, const KnowledgeGraph& kg) {
    auto fields = split(line, '\t');
    std::optional<double> sc;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> counts;
    std::string_view text;
    if (fields.size() == 1) {
        text = fields[0];
    } else if (fields.size() == 2) {
        sc = std::stod(std::string(fields[0]));
        text = fields[1];
    } else if (fields.size() == 4) {
        sc = std::stod(std::string(fields[0]));
        counts = {std::stoull(std::string(fields[1])), std::stoull(std::string(fields[2]))};
        text = fields[3];
    } else {
        fail("expected 1, 2 or 4 tab-separated fields, got " + std::to_string(fields.size()));
    }

    auto arrow = text.find("<=");
    if (arrow == std::string_view::npos) fail("missing `<=`");
    ParsedAtom head = parse_atom(text.substr(0, arrow));
    if (!head.lhs.is_var || !head.rhs.is_var) fail("head terms must be variables");
    if (head.lhs.var == 'M' || head.rhs.var == 'M') fail("`M` is reserved for the AUX auxiliary");
    if (head.lhs.var == head.rhs.var) fail("head variables must differ");

    std::vector<ParsedAtom> atoms;
    for (auto part : split_atoms(text.substr(arrow + 2))) {
        if (trim(part).empty()) fail("empty body atom");
        atoms.push_back(parse_atom(part));
    }
    if (atoms.empty()) fail("empty body");

    struct PendingEnt { std::string entity; char var; };
    struct PendingAux { std::string relation; char var; bool subject_is_anchor; };
    std::vector<PendingEnt> ents;
    std::vector<PendingAux> auxes;
    std::vector<Edge> edges;
    std::vector<std::pair<std::string, std::pair<char, char>>> edge_labels;

    for (const auto& atom : atoms) {
        bool lhs_m = atom.lhs.is_var && atom.lhs.var == 'M';
        bool rhs_m = atom.rhs.is_var && atom.rhs.var == 'M';
        if (lhs_m && rhs_m) fail("atom with two auxiliary variables");
        if (atom.name == "is" && !atom.lhs.is_var && atom.rhs.is_var && !rhs_m) {
            ents.push_back({atom.lhs.label, atom.rhs.var});
            continue;
        }
        if (lhs_m || rhs_m) {
            const ParsedTerm& other = lhs_m ? atom.rhs : atom.lhs;
            if (!other.is_var) fail("AUX atom `" + atom.name + "` must anchor on a variable");
            auxes.push_back({atom.name, other.var, /*subject_is_anchor=*/rhs_m});
            continue;
        }
        if (!atom.lhs.is_var || !atom.rhs.is_var)
            fail("constants are only allowed in `is(entity, Var)` atoms (atom `" + atom.name + "`)");
        if (atom.lhs.var == atom.rhs.var) fail("self-loop atom `" + atom.name + "`");
        edge_labels.push_back({atom.name, {atom.lhs.var, atom.rhs.var}});
    }

    // Relations intern before the chain search so unknown-label errors win.
    for (const auto& [label, uv] : edge_labels)
        edges.push_back({intern_relation(label, kg), uv.first, uv.second});

    ChainSearch search(edges, head.lhs.var, head.rhs.var);
    if (!search.dfs()) {
        if (search.overlong > 0)
            fail("chain length exceeds " + std::to_string(kMaxRuleLength));
        fail("body atoms do not form a chain from " + std::string(1, head.lhs.var) + " to " +
             std::string(1, head.rhs.var));
    }

    Rule rule;
    rule.head = intern_relation(head.name, kg);
    const auto& path = search.path;
    for (std::size_t step = 0; step + 1 < path.size(); ++step) {
        const Edge& e = edges[search.chain_edges[step]];
        bool forward = (e.u == path[step] && e.v == path[step + 1]);
        rule.body.push_back({e.relation, !forward});
    }

    auto anchor_of = [&](char var) -> std::uint8_t {
        auto it = std::find(path.begin(), path.end(), var);
        if (it == path.end()) fail("branch variable `" + std::string(1, var) + "` not on the chain");
        if (it == path.begin()) fail("branch atoms may not anchor on the query variable");
        return static_cast<std::uint8_t>(it - path.begin());
    };

    for (const auto& ent : ents) {
        auto id = kg.entities().find(ent.entity);
        if (!id) fail("unknown entity `" + ent.entity + "`");
        rule.branches.push_back({BranchKind::Ent, anchor_of(ent.var), 0, false, *id});
    }
    for (const auto& aux : auxes) {
        rule.branches.push_back({BranchKind::Aux, anchor_of(aux.var),
                                 intern_relation(aux.relation, kg), aux.subject_is_anchor, 0});
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (search.used[i]) continue;
        const Edge& e = edges[i];
        bool subject_is_anchor = (e.v == head.lhs.var);
        char anchor_var = subject_is_anchor ? e.u : e.v;
        rule.branches.push_back(
            {BranchKind::Qry, anchor_of(anchor_var), e.relation, subject_is_anchor, 0});
    }

    std::sort(rule.branches.begin(), rule.branches.end());
    if (std::adjacent_find(rule.branches.begin(), rule.branches.end()) != rule.branches.end())
        fail("duplicate branch atom");

    // A QRY branch that restates the first chain atom (or, reversed, its
    // inverse) adds no constraint and violates the tree-rule shape.
    for (const auto& b : rule.branches) {
        if (b.kind != BranchKind::Qry || b.anchor != 1) continue;
        const BodyAtom& first = rule.body.front();
        if (b.relation == first.relation && b.subject_is_anchor == first.inverse)
            fail("branch duplicates a body atom");
    }

    if (counts) {
        if (counts->second == 0) fail("body_count must be positive in rule stats");
        if (counts->first > counts->second) fail("support exceeds body_count in rule stats");
        rule.stats = RuleStats::from_counts(counts->first, counts->second);
    } else if (sc) {
        RuleStats s;
        s.sc = *sc;
        s.has_sc = true;
        rule.stats = s;
    }
    return rule;
}

namespace {

char variable_letter(std::size_t index, std::size_t n) {
    if (index == 0) return 'X';
    if (index == n) return n == 1 ? 'Y' : 'Z';
    return static_cast<char>('A' + index - 1);
}

std::string format_sc(double sc) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", sc);
    return buf;
}

}  // namespace

std::string serialize_rule(const Rule& rule, const KnowledgeGraph& kg, bool with_stats) {
    if (rule.body.empty()) throw std::runtime_error("serialize: rule with empty body");
    const std::size_t n = rule.body.size();

    std::string out;
    if (with_stats && rule.stats) {
        const RuleStats& s = *rule.stats;
        if (s.has_counts) {
            out += format_sc(s.has_sc ? s.sc : 0.0);
            out += '\t';
            out += std::to_string(s.support);
            out += '\t';
            out += std::to_string(s.body_count);
            out += '\t';
        } else if (s.has_sc) {
            out += format_sc(s.sc);
            out += '\t';
        }
    }

    auto var = [&](std::size_t i) { return std::string(1, variable_letter(i, n)); };
    auto atom = [&](const std::string& name, const std::string& a, const std::string& b) {
        return name + "(" + a + "," + b + ")";
    };

    out += atom(kg.relations().label(rule.head), var(0), var(n));
    out += " <= ";
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ", ";
        const BodyAtom& a = rule.body[i];
        const std::string& rel = kg.relations().label(a.relation);
        out += a.inverse ? atom(rel, var(i + 1), var(i)) : atom(rel, var(i), var(i + 1));
    }

    auto branches = rule.branches;
    std::sort(branches.begin(), branches.end());
    for (const auto& b : branches) {
        out += ", ";
        std::string anchor = var(b.anchor);
        switch (b.kind) {
            case BranchKind::Ent:
                out += atom("is", kg.entities().label(b.entity), anchor);
                break;
            case BranchKind::Qry: {
                const std::string& rel = kg.relations().label(b.relation);
                out += b.subject_is_anchor ? atom(rel, anchor, var(0)) : atom(rel, var(0), anchor);
                break;
            }
            case BranchKind::Aux: {
                const std::string& rel = kg.relations().label(b.relation);
                out += b.subject_is_anchor ? atom(rel, anchor, "M") : atom(rel, "M", anchor);
                break;
            }
        }
    }
    return out;
}

std::string rule_signature(const Rule& rule, const KnowledgeGraph& kg) {
    return serialize_rule(rule, kg, /*with_stats=*/false);
}

LoadedRules import_external_rules(const std::filesystem::path& path, const KnowledgeGraph& kg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rule file: " + path.string());
    LoadedRules out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        try {
            out.rules.push_back(parse_rule(line, kg));
        } catch (const std::exception& e) {
            std::string msg = e.what();
            if (msg.find("unknown relation") != std::string::npos ||
                msg.find("unknown entity") != std::string::npos) {
                out.skipped++;
                continue;
            }
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + msg);
        }
    }
    return out;
}

}  // namespace treerule
