#pragma once

#include "treerule/kg.hpp"

namespace treerule::testing {

// Five-triple toy graph: alice and bob both live in italy, italy's
// language is italian, only alice actually speaks it, and only alice was
// born in italy. The chain rule speak(X,Z) <= live(X,A), lang(A,Z) has
// sc 0.5 here; adding bornIn(X,A) lifts it to 1.0.
inline KnowledgeGraph toy_kg() {
    return KnowledgeGraph::from_labels({
        {"alice", "live", "italy"},
        {"bob", "live", "italy"},
        {"italy", "lang", "italian"},
        {"alice", "speak", "italian"},
        {"alice", "bornIn", "italy"},
    });
}

inline KnowledgeGraph tiny_kg() {
    return KnowledgeGraph::from_labels({
        {"alice", "live", "italy"},
        {"italy", "lang", "italian"},
        {"alice", "speak", "italian"},
    });
}

inline KnowledgeGraph single_fact_kg() {
    return KnowledgeGraph::from_labels({{"alice", "live", "italy"}});
}

}  // namespace treerule::testing
