#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "treerule/kg.hpp"

using namespace treerule;
using namespace treerule::testing;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("treerule_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    void write(const std::string& name, const std::string& content) const {
        std::ofstream out(path / name);
        out << content;
    }
};

}  // namespace

TEST_CASE("single-fact toy graph") {
    auto kg = single_fact_kg();
    CHECK(kg.entity_count() == 2);
    CHECK(kg.relation_count() == 1);
    auto live = *kg.relations().find("live");
    CHECK(kg.relation_matrix(live, false).nnz() == 1);
    CHECK(kg.has_train_fact(*kg.entities().find("alice"), live, *kg.entities().find("italy")));
}

TEST_CASE("duplicate lines collapse to one adjacency entry") {
    auto kg = KnowledgeGraph::from_labels({
        {"a", "r", "b"},
        {"a", "r", "b"},
    });
    CHECK(kg.train().size() == 1);
    CHECK(kg.relation_matrix(0, false).nnz() == 1);
}

TEST_CASE("load_split reads TSV files and reports errors precisely") {
    TempDir dir;
    dir.write("train.txt", "alice\tlive\titaly\nitaly\tlang\titalian\n");
    dir.write("valid.txt", "alice\tlive\tspain\n");
    dir.write("test.txt", "bob\tlive\titaly\n");

    auto kg = KnowledgeGraph::load_split(dir.path);
    CHECK(kg.train().size() == 2);
    CHECK(kg.valid().size() == 1);
    CHECK(kg.test().size() == 1);
    // entities from valid/test are interned but have empty adjacency rows
    CHECK(kg.entities().find("spain").has_value());
    CHECK(kg.entities().find("bob").has_value());
    auto live = *kg.relations().find("live");
    CHECK_FALSE(kg.has_train_fact(*kg.entities().find("bob"), live, *kg.entities().find("italy")));
    CHECK(kg.known_fact(*kg.entities().find("bob"), live, *kg.entities().find("italy")));

    SUBCASE("missing file names the file") {
        std::filesystem::remove(dir.path / "valid.txt");
        CHECK_THROWS_WITH_AS(KnowledgeGraph::load_split(dir.path),
                             doctest::Contains("valid.txt"), std::runtime_error);
    }
    SUBCASE("malformed line carries its line number") {
        dir.write("train.txt", "alice\tlive\titaly\nbroken line\n");
        CHECK_THROWS_WITH_AS(KnowledgeGraph::load_split(dir.path), doctest::Contains(":2"),
                             std::runtime_error);
    }
    SUBCASE("empty train split is an error") {
        dir.write("train.txt", "\n");
        CHECK_THROWS_WITH_AS(KnowledgeGraph::load_split(dir.path),
                             doctest::Contains("empty train"), std::runtime_error);
    }
}

TEST_CASE("interning round-trips every label") {
    auto kg = toy_kg();
    for (std::uint32_t e = 0; e < kg.entity_count(); ++e)
        CHECK(*kg.entities().find(kg.entities().label(e)) == e);
    for (std::uint32_t r = 0; r < kg.relation_count(); ++r)
        CHECK(*kg.relations().find(kg.relations().label(r)) == r);
}

TEST_CASE("adjacency matches the train set exactly on random graphs") {
    std::mt19937_64 rng(31);
    for (int round = 0; round < 10; ++round) {
        auto kg = random_kg(rng, {.max_entities = 20, .max_relations = 4, .max_triples = 120});
        TripleOracle oracle(kg);
        for (RelationId r = 0; r < kg.relation_count(); ++r) {
            const auto& m = kg.relation_matrix(r, false);
            const auto& mt = kg.relation_matrix(r, true);
            for (EntityId i = 0; i < kg.entity_count(); ++i)
                for (EntityId j = 0; j < kg.entity_count(); ++j) {
                    CHECK(m.contains(i, j) == oracle.holds(i, r, j));
                    CHECK(mt.contains(j, i) == m.contains(i, j));
                }
        }
    }
}

TEST_CASE("relation_matrix rejects out-of-range ids") {
    auto kg = single_fact_kg();
    CHECK_THROWS(kg.relation_matrix(99, false));
}

TEST_CASE("UMLS split loads with the published label counts") {
    const char* root = std::getenv("TREERULE_DATA");
    REQUIRE_MESSAGE(root != nullptr, "TREERULE_DATA must point at the bundled data directory");
    auto kg = KnowledgeGraph::load_split(std::filesystem::path(root) / "umls");
    CHECK(kg.entity_count() == 135);
    CHECK(kg.relation_count() == 46);
    CHECK(kg.train().size() == 5216);
    CHECK(kg.valid().size() == 652);
    CHECK(kg.test().size() == 661);
}
