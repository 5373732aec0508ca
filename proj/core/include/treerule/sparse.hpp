#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace treerule {

/// CSR-like binary matrix: per-row strictly increasing column indices,
/// all stored entries implicitly 1. Immutable after construction.
class SparseBinaryMatrix {
public:
    SparseBinaryMatrix() = default;

    static SparseBinaryMatrix from_pairs(std::uint32_t rows, std::uint32_t cols,
                                         std::vector<std::pair<std::uint32_t, std::uint32_t>> entries);

    std::uint32_t rows() const { return rows_; }
    std::uint32_t cols() const { return cols_; }
    std::size_t nnz() const { return col_idx_.size(); }

    std::span<const std::uint32_t> row(std::uint32_t i) const {
        return {col_idx_.data() + row_ptr_[i], col_idx_.data() + row_ptr_[i + 1]};
    }

    SparseBinaryMatrix transposed() const;

    bool contains(std::uint32_t i, std::uint32_t j) const;

private:
    std::uint32_t rows_ = 0, cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::uint32_t> col_idx_;
};

/// Batched variable grounding: one row per reasoning track, each row the
/// sorted set of entity indices currently reachable at that variable.
struct GroundingMatrix {
    std::uint32_t width = 0;
    std::vector<std::vector<std::uint32_t>> rows;

    std::size_t batch() const { return rows.size(); }

    static GroundingMatrix one_hot(std::uint32_t width, std::span<const std::uint32_t> entities);
};

using CountVector = std::vector<std::uint32_t>;
using ScoreVector = std::vector<double>;

/// One reasoning hop over the boolean semiring: row i of the result is the
/// union of m's rows indexed by the active entities of v's row i.
GroundingMatrix hop(const GroundingMatrix& v, const SparseBinaryMatrix& m);

/// Rowwise set intersection.
GroundingMatrix mask(const GroundingMatrix& a, const GroundingMatrix& b);

/// Rowwise set difference a \ b.
GroundingMatrix mask_complement(const GroundingMatrix& a, const GroundingMatrix& b);

/// Intersect every row with one global sorted entity set.
GroundingMatrix mask_vector(const GroundingMatrix& a, std::span<const std::uint32_t> sorted_entities);

/// count[e] = number of rows in which e is active.
CountVector column_counts(const GroundingMatrix& g);

/// count[i] = nnz of row i (entities with an outgoing edge under this relation).
CountVector row_sum_vector(const SparseBinaryMatrix& m);

/// Total number of active (row, entity) pairs.
std::uint64_t norm1(const GroundingMatrix& g);

}  // namespace treerule
