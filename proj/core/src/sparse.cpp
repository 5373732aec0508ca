#include "treerule/sparse.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace treerule {

SparseBinaryMatrix SparseBinaryMatrix::from_pairs(
    std::uint32_t rows, std::uint32_t cols,
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries) {
    for (const auto& [i, j] : entries) {
        if (i >= rows || j >= cols)
            throw std::runtime_error("sparse matrix entry (" + std::to_string(i) + "," +
                                     std::to_string(j) + ") out of shape " + std::to_string(rows) +
                                     "x" + std::to_string(cols));
    }
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());

    SparseBinaryMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(rows + 1, 0);
    m.col_idx_.reserve(entries.size());
    for (const auto& [i, j] : entries) {
        m.row_ptr_[i + 1]++;
        m.col_idx_.push_back(j);
    }
    for (std::uint32_t i = 0; i < rows; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    return m;
}

SparseBinaryMatrix SparseBinaryMatrix::transposed() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
    entries.reserve(nnz());
    for (std::uint32_t i = 0; i < rows_; ++i)
        for (std::uint32_t j : row(i)) entries.emplace_back(j, i);
    return from_pairs(cols_, rows_, std::move(entries));
}

bool SparseBinaryMatrix::contains(std::uint32_t i, std::uint32_t j) const {
    if (i >= rows_) return false;
    auto r = row(i);
    return std::binary_search(r.begin(), r.end(), j);
}

GroundingMatrix GroundingMatrix::one_hot(std::uint32_t width,
                                         std::span<const std::uint32_t> entities) {
    GroundingMatrix g;
    g.width = width;
    g.rows.reserve(entities.size());
    for (std::uint32_t e : entities) {
        if (e >= width) throw std::runtime_error("one_hot entity index out of range");
        g.rows.push_back({e});
    }
    return g;
}

namespace {

void require_same_shape(const GroundingMatrix& a, const GroundingMatrix& b, const char* op) {
    if (a.width != b.width || a.rows.size() != b.rows.size())
        throw std::runtime_error(std::string(op) + ": shape mismatch (" +
                                 std::to_string(a.rows.size()) + "x" + std::to_string(a.width) +
                                 " vs " + std::to_string(b.rows.size()) + "x" +
                                 std::to_string(b.width) + ")");
}

}  // namespace

GroundingMatrix hop(const GroundingMatrix& v, const SparseBinaryMatrix& m) {
    if (v.width != m.rows())
        throw std::runtime_error("hop: grounding width " + std::to_string(v.width) +
                                 " does not match matrix rows " + std::to_string(m.rows()));
    GroundingMatrix out;
    out.width = m.cols();
    out.rows.resize(v.rows.size());

    std::vector<std::uint8_t> seen(m.cols(), 0);
    std::vector<std::uint32_t> touched;
    for (std::size_t i = 0; i < v.rows.size(); ++i) {
        touched.clear();
        for (std::uint32_t j : v.rows[i]) {
            for (std::uint32_t k : m.row(j)) {
                if (!seen[k]) {
                    seen[k] = 1;
                    touched.push_back(k);
                }
            }
        }
        std::sort(touched.begin(), touched.end());
        out.rows[i] = touched;
        for (std::uint32_t k : touched) seen[k] = 0;
    }
    return out;
}

GroundingMatrix mask(const GroundingMatrix& a, const GroundingMatrix& b) {
    require_same_shape(a, b, "mask");
    GroundingMatrix out;
    out.width = a.width;
    out.rows.resize(a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        std::set_intersection(a.rows[i].begin(), a.rows[i].end(), b.rows[i].begin(),
                              b.rows[i].end(), std::back_inserter(out.rows[i]));
    }
    return out;
}

GroundingMatrix mask_complement(const GroundingMatrix& a, const GroundingMatrix& b) {
    require_same_shape(a, b, "mask_complement");
    GroundingMatrix out;
    out.width = a.width;
    out.rows.resize(a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        std::set_difference(a.rows[i].begin(), a.rows[i].end(), b.rows[i].begin(),
                            b.rows[i].end(), std::back_inserter(out.rows[i]));
    }
    return out;
}

GroundingMatrix mask_vector(const GroundingMatrix& a, std::span<const std::uint32_t> sorted_entities) {
    GroundingMatrix out;
    out.width = a.width;
    out.rows.resize(a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        std::set_intersection(a.rows[i].begin(), a.rows[i].end(), sorted_entities.begin(),
                              sorted_entities.end(), std::back_inserter(out.rows[i]));
    }
    return out;
}

CountVector column_counts(const GroundingMatrix& g) {
    CountVector counts(g.width, 0);
    for (const auto& row : g.rows)
        for (std::uint32_t e : row) counts[e]++;
    return counts;
}

CountVector row_sum_vector(const SparseBinaryMatrix& m) {
    CountVector counts(m.rows(), 0);
    for (std::uint32_t i = 0; i < m.rows(); ++i)
        counts[i] = static_cast<std::uint32_t>(m.row(i).size());
    return counts;
}

std::uint64_t norm1(const GroundingMatrix& g) {
    std::uint64_t total = 0;
    for (const auto& row : g.rows) total += row.size();
    return total;
}

}  // namespace treerule
