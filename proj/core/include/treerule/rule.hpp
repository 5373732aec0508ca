#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "treerule/kg.hpp"

namespace treerule {

/// Chain body atom i links x_i to x_{i+1}; inverse means the stored fact
/// direction is (x_{i+1}, r, x_i).
struct BodyAtom {
    RelationId relation = 0;
    bool inverse = false;

    friend auto operator<=>(const BodyAtom&, const BodyAtom&) = default;
};

/// Tie-break order for branch selection is ENT < QRY < AUX.
enum class BranchKind : std::uint8_t { Ent = 0, Qry = 1, Aux = 2 };

const char* branch_kind_name(BranchKind k);

/// Branch atom constraining body variable x_anchor (anchor in 1..n).
///   ENT  is(e, x_i)                      — grounds x_i to one entity
///   QRY  r(x_0, x_i) / r(x_i, x_0)       — one-hop link to the query variable
///   AUX  r(M, x_i) / r(x_i, M)           — one-hop link to an auxiliary variable
/// subject_is_anchor tells whether x_i is the first argument of the atom.
struct BranchAtom {
    BranchKind kind = BranchKind::Ent;
    std::uint8_t anchor = 1;
    RelationId relation = 0;      // QRY, AUX
    bool subject_is_anchor = false;  // QRY, AUX
    EntityId entity = 0;          // ENT

    friend auto operator<=>(const BranchAtom&, const BranchAtom&) = default;
};

struct RuleStats {
    std::uint64_t support = 0;
    std::uint64_t body_count = 0;
    double sc = 0.0;
    bool has_sc = false;       // false: sc undefined (no body groundings)
    bool has_counts = false;   // false: only a confidence was imported

    static RuleStats from_counts(std::uint64_t support, std::uint64_t body_count);
};

/// A chain rule (branches empty) or tree rule (branches nonempty):
///   head(x_0, x_n) <= r_0(x_0, x_1) ∧ ... ∧ r_{n-1}(x_{n-1}, x_n) [∧ branches]
struct Rule {
    RelationId head = 0;
    std::vector<BodyAtom> body;
    std::vector<BranchAtom> branches;
    std::optional<RuleStats> stats;

    int length() const { return static_cast<int>(body.size()); }
    bool is_tree() const { return !branches.empty(); }

    friend bool operator==(const Rule& a, const Rule& b) {
        return a.head == b.head && a.body == b.body && a.branches == b.branches;
    }
};

/// Structural ordering used for deterministic output (head, body, branches).
bool rule_less(const Rule& a, const Rule& b);

inline constexpr int kMaxRuleLength = 3;

/// Parses one rule line:
///   [<sc>\t[<support>\t<body_count>\t]]head(X,·) <= atom{, atom}
/// Variables are single uppercase letters (M reserved for the AUX
/// auxiliary); the ENT branch form is `is(<entity>,<Var>)`. Throws on
/// unknown labels, disconnected bodies and length > 3.
Rule parse_rule(std::string_view line, const KnowledgeGraph& kg);

/// Canonical text form; parse(serialize(r)) is structurally identical.
/// Branches are emitted in (kind, anchor, relation/entity, direction) order.
std::string serialize_rule(const Rule& rule, const KnowledgeGraph& kg, bool with_stats = true);

/// Canonical body+head text without stats; stable rule identity for
/// deduplication, sorting and per-rule random streams.
std::string rule_signature(const Rule& rule, const KnowledgeGraph& kg);

struct LoadedRules {
    std::vector<Rule> rules;
    std::size_t skipped = 0;  // lines referencing unknown labels
};

/// Reads a rule file (one rule per line, `#` lines ignored). Rules naming
/// unknown relations/entities are skipped and counted; structurally
/// malformed lines raise an error with their line number.
LoadedRules import_external_rules(const std::filesystem::path& path, const KnowledgeGraph& kg);

}  // namespace treerule
