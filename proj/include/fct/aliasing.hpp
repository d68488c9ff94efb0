#pragma once

// Aliasing of Chebyshev modes on first-kind grids.
//
// On a P-point grid (theta_k = (k + 1/2) pi / P),
//
//   (1/P) sum_k cos(n theta_k) cos(m theta_k) = 1/2 delta_P(m + n) + 1/2 delta_P(m - n)
//
// with delta_P(l) = 1 if l = 0 (mod 4P), -1 if l = 2P (mod 4P), else 0. For a
// fixed mode m at most one n in [0, P) gets a nonzero weight, so every column
// of the aliasing matrix of a tensor grid holds at most one entry.

#include "fct/chebgrid.hpp"
#include "fct/errors.hpp"
#include "fct/multiindex.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace fct {

inline int delta(std::uint64_t P, std::int64_t ell) {
    const auto period = static_cast<std::int64_t>(4 * P);
    std::int64_t r = ell % period;
    if (r < 0) r += period;
    if (r == 0) return 1;
    if (r == static_cast<std::int64_t>(2 * P)) return -1;
    return 0;
}

inline double alias_entry_1d(std::uint64_t P, std::uint64_t n, std::uint64_t m) {
    const auto sn = static_cast<std::int64_t>(n);
    const auto sm = static_cast<std::int64_t>(m);
    return 0.5 * delta(P, sm + sn) + 0.5 * delta(P, sm - sn);
}

struct AliasTerm {
    std::uint64_t row_freq;
    double weight;

    friend bool operator==(const AliasTerm&, const AliasTerm&) = default;
};

// The unique aliased frequency of mode m on a P-point grid and its weight, or
// nothing when cos(m theta_k) vanishes on the grid (m = P mod 2P).
inline std::optional<AliasTerm> fold_frequency(std::uint64_t P, std::uint64_t m) {
    const std::uint64_t r = m % (2 * P);
    if (r == P) return std::nullopt;
    const std::uint64_t n = r < P ? r : 2 * P - r;
    return AliasTerm{n, alias_entry_1d(P, n, m)};
}

// Sparse aliasing matrix of one tensor grid. Rows are frequency tuples in the
// row-major layout of the grid, columns follow the index set. Only nonzero
// entries are stored, sorted by column; there is at most one per column.
class AliasingMatrix {
public:
    AliasingMatrix(GridSpec grid, std::size_t n_cols) : grid_(std::move(grid)), n_cols_(n_cols) {}

    [[nodiscard]] const GridSpec& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t n_rows() const noexcept { return grid_.total_points(); }
    [[nodiscard]] std::size_t n_cols() const noexcept { return n_cols_; }
    [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }

    [[nodiscard]] std::span<const std::uint32_t> cols() const noexcept { return cols_; }
    [[nodiscard]] std::span<const std::uint64_t> rows() const noexcept { return rows_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    // Entries must arrive with strictly increasing column.
    void push_entry(std::size_t col, std::uint64_t row, double value) {
        if (col >= n_cols_ || row >= n_rows())
            throw DomainError("aliasing entry out of bounds");
        if (!cols_.empty() && col <= cols_.back())
            throw DomainError("aliasing entries must be pushed in increasing column order");
        cols_.push_back(static_cast<std::uint32_t>(col));
        rows_.push_back(row);
        values_.push_back(value);
    }

    void reserve(std::size_t n) {
        cols_.reserve(n);
        rows_.reserve(n);
        values_.reserve(n);
    }

    friend bool operator==(const AliasingMatrix&, const AliasingMatrix&) = default;

private:
    GridSpec grid_;
    std::size_t n_cols_;
    std::vector<std::uint32_t> cols_;
    std::vector<std::uint64_t> rows_;
    std::vector<double> values_;
};

inline AliasingMatrix assemble_block(const GridSpec& g, const IndexSet& set) {
    if (g.dim() != set.dim())
        throw DimensionError("grid dimension " + std::to_string(g.dim()) +
                             " does not match index set dimension " + std::to_string(set.dim()));
    if (set.size() > std::numeric_limits<std::uint32_t>::max())
        throw OverflowError("index set too large for 32-bit column indices");
    const std::size_t D = g.dim();
    const auto strides = g.strides();
    AliasingMatrix block(g, set.size());
    block.reserve(set.size());
    for (std::size_t j = 0; j < set.size(); ++j) {
        const auto m = set[j];
        std::uint64_t row = 0;
        double value = 1.0;
        bool empty = false;
        for (std::size_t i = 0; i < D; ++i) {
            auto term = fold_frequency(g[i], m[i]);
            if (!term) {
                empty = true;
                break;
            }
            row += term->row_freq * strides[i];
            value *= term->weight;
        }
        if (!empty) block.push_entry(j, row, value);
    }
    return block;
}

} // namespace fct
