#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "treerule/sparse.hpp"

namespace treerule {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Dense label interning table; ids are assigned in first-seen order.
class Vocab {
public:
    std::uint32_t intern(std::string_view label);
    std::optional<std::uint32_t> find(std::string_view label) const;
    const std::string& label(std::uint32_t id) const { return labels_.at(id); }
    std::uint32_t size() const { return static_cast<std::uint32_t>(labels_.size()); }

private:
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<std::string> labels_;
};

/// Interned triple store with one binary adjacency matrix (plus transpose)
/// per relation. Only train facts populate adjacency; valid/test are held
/// for evaluation. Immutable after build, safe for concurrent reads.
class KnowledgeGraph {
public:
    /// Loads `train.txt`, `valid.txt`, `test.txt` (TSV, head\trelation\ttail)
    /// from a directory. Entity/relation tables cover all three splits.
    static KnowledgeGraph load_split(const std::filesystem::path& dir);

    /// Test helper: build from in-memory label triples.
    static KnowledgeGraph from_labels(
        const std::vector<std::array<std::string, 3>>& train,
        const std::vector<std::array<std::string, 3>>& valid = {},
        const std::vector<std::array<std::string, 3>>& test = {});

    const Vocab& entities() const { return entities_; }
    const Vocab& relations() const { return relations_; }
    std::uint32_t entity_count() const { return entities_.size(); }
    std::uint32_t relation_count() const { return relations_.size(); }

    const std::vector<Triple>& train() const { return train_; }
    const std::vector<Triple>& valid() const { return valid_; }
    const std::vector<Triple>& test() const { return test_; }

    /// M_r, or M_r^T when inverse. Shares storage with the graph.
    const SparseBinaryMatrix& relation_matrix(RelationId r, bool inverse) const;

    /// True iff (h, r, t) is a train fact.
    bool has_train_fact(EntityId h, RelationId r, EntityId t) const;

    /// True iff (h, r, t) appears in train, valid or test (filtered ranking).
    bool known_fact(EntityId h, RelationId r, EntityId t) const;

private:
    Vocab entities_;
    Vocab relations_;
    std::vector<Triple> train_, valid_, test_;
    std::vector<SparseBinaryMatrix> adjacency_, adjacency_t_;
    std::unordered_set<std::uint64_t> all_facts_;

    void build_matrices();
    std::uint64_t pack(EntityId h, RelationId r, EntityId t) const;
};

}  // namespace treerule
