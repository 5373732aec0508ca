#pragma once

// Internal helpers shared by the evaluator, refiner and link-prediction
// modules. Not installed.

#include <cstdint>
#include <vector>

#include "treerule/kg.hpp"
#include "treerule/rule.hpp"
#include "treerule/sparse.hpp"

namespace treerule::detail {

/// Matrix that moves groundings from x_i to x_{i+1} (or back, when reverse).
inline const SparseBinaryMatrix& body_matrix(const KnowledgeGraph& kg, const BodyAtom& atom,
                                             bool reverse = false) {
    return kg.relation_matrix(atom.relation, reverse ? !atom.inverse : atom.inverse);
}

/// Matrix that moves a query-variable grounding onto a QRY branch anchor.
inline const SparseBinaryMatrix& qry_matrix(const KnowledgeGraph& kg, const BranchAtom& b) {
    return kg.relation_matrix(b.relation, b.subject_is_anchor);
}

/// Entities satisfying an AUX branch: at least one edge under the relation
/// in the anchored direction.
inline std::vector<std::uint32_t> aux_entities(const KnowledgeGraph& kg, RelationId relation,
                                               bool subject_is_anchor) {
    const SparseBinaryMatrix& m = kg.relation_matrix(relation, !subject_is_anchor);
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < m.rows(); ++i)
        if (!m.row(i).empty()) out.push_back(i);
    return out;
}

/// Entities able to ground x_0: nonzero row sum under the first body
/// atom's effective matrix.
inline std::vector<std::uint32_t> query_candidates(const KnowledgeGraph& kg, const Rule& rule) {
    const SparseBinaryMatrix& m = body_matrix(kg, rule.body.front());
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < m.rows(); ++i)
        if (!m.row(i).empty()) out.push_back(i);
    return out;
}

/// Forward body grounding for one batch of x_0 rows with branch masks
/// applied at their anchors. Returns V_n.
GroundingMatrix ground_body(const KnowledgeGraph& kg, const Rule& rule, const GroundingMatrix& v0);

}  // namespace treerule::detail
