#include "treerule/kg.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "treerule/util.hpp"

namespace treerule {

std::uint32_t Vocab::intern(std::string_view label) {
    auto it = index_.find(std::string(label));
    if (it != index_.end()) return it->second;
    std::uint32_t id = static_cast<std::uint32_t>(labels_.size());
    labels_.emplace_back(label);
    index_.emplace(labels_.back(), id);
    return id;
}

std::optional<std::uint32_t> Vocab::find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

namespace {

struct RawTriple {
    std::string head, relation, tail;
};

std::vector<RawTriple> read_triple_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open triple file: " + path.string());
    std::vector<RawTriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 3)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected head<TAB>relation<TAB>tail, got " +
                                     std::to_string(fields.size()) + " field(s)");
        RawTriple t{std::string(trim(fields[0])), std::string(trim(fields[1])),
                    std::string(trim(fields[2]))};
        if (t.head.empty() || t.relation.empty() || t.tail.empty())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": empty label");
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Triple> intern_split(const std::vector<RawTriple>& raw, Vocab& entities,
                                 Vocab& relations) {
    std::vector<Triple> out;
    out.reserve(raw.size());
    for (const auto& t : raw)
        out.push_back({entities.intern(t.head), relations.intern(t.relation),
                       entities.intern(t.tail)});
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

KnowledgeGraph KnowledgeGraph::load_split(const std::filesystem::path& dir) {
    for (const char* name : {"train.txt", "valid.txt", "test.txt"})
        if (!std::filesystem::exists(dir / name))
            throw std::runtime_error("missing split file: " + (dir / name).string());

    KnowledgeGraph kg;
    auto train_raw = read_triple_file(dir / "train.txt");
    auto valid_raw = read_triple_file(dir / "valid.txt");
    auto test_raw = read_triple_file(dir / "test.txt");
    if (train_raw.empty())
        throw std::runtime_error("empty train split: " + (dir / "train.txt").string());

    kg.train_ = intern_split(train_raw, kg.entities_, kg.relations_);
    kg.valid_ = intern_split(valid_raw, kg.entities_, kg.relations_);
    kg.test_ = intern_split(test_raw, kg.entities_, kg.relations_);
    kg.build_matrices();
    return kg;
}

KnowledgeGraph KnowledgeGraph::from_labels(const std::vector<std::array<std::string, 3>>& train,
                                           const std::vector<std::array<std::string, 3>>& valid,
                                           const std::vector<std::array<std::string, 3>>& test) {
    if (train.empty()) throw std::runtime_error("empty train split");
    auto convert = [](const std::vector<std::array<std::string, 3>>& in) {
        std::vector<RawTriple> out;
        out.reserve(in.size());
        for (const auto& t : in) out.push_back({t[0], t[1], t[2]});
        return out;
    };
    KnowledgeGraph kg;
    kg.train_ = intern_split(convert(train), kg.entities_, kg.relations_);
    kg.valid_ = intern_split(convert(valid), kg.entities_, kg.relations_);
    kg.test_ = intern_split(convert(test), kg.entities_, kg.relations_);
    kg.build_matrices();
    return kg;
}

void KnowledgeGraph::build_matrices() {
    const std::uint32_t n = entity_count();
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per_relation(relation_count());
    for (const Triple& t : train_) per_relation[t.relation].emplace_back(t.head, t.tail);

    adjacency_.reserve(relation_count());
    adjacency_t_.reserve(relation_count());
    for (std::uint32_t r = 0; r < relation_count(); ++r) {
        adjacency_.push_back(SparseBinaryMatrix::from_pairs(n, n, std::move(per_relation[r])));
        adjacency_t_.push_back(adjacency_.back().transposed());
    }

    for (const auto* split : {&train_, &valid_, &test_})
        for (const Triple& t : *split) all_facts_.insert(pack(t.head, t.relation, t.tail));
}

std::uint64_t KnowledgeGraph::pack(EntityId h, RelationId r, EntityId t) const {
    return (static_cast<std::uint64_t>(h) * relation_count() + r) * entity_count() + t;
}

const SparseBinaryMatrix& KnowledgeGraph::relation_matrix(RelationId r, bool inverse) const {
    if (r >= relation_count())
        throw std::runtime_error("relation id " + std::to_string(r) + " out of range (|R|=" +
                                 std::to_string(relation_count()) + ")");
    return inverse ? adjacency_t_[r] : adjacency_[r];
}

bool KnowledgeGraph::has_train_fact(EntityId h, RelationId r, EntityId t) const {
    if (r >= relation_count() || h >= entity_count() || t >= entity_count()) return false;
    return adjacency_[r].contains(h, t);
}

bool KnowledgeGraph::known_fact(EntityId h, RelationId r, EntityId t) const {
    if (r >= relation_count() || h >= entity_count() || t >= entity_count()) return false;
    return all_facts_.count(pack(h, r, t)) > 0;
}

}  // namespace treerule
