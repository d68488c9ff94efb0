#pragma once

#include "fct/aliasing.hpp"
#include "fct/chebgrid.hpp"
#include "fct/errors.hpp"
#include "fct/multiindex.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace fct {

// The L tensor grids of an L-grid together with the parameters that produced them.
struct LGridSpec {
    std::vector<GridSpec> grids;
    std::uint64_t seed = 0;
    std::size_t target_N = 0;
    Exponent degree_cap = 0;

    [[nodiscard]] std::size_t total_points() const {
        std::size_t total = 0;
        for (const auto& g : grids) total += g.total_points();
        return total;
    }

    friend bool operator==(const LGridSpec&, const LGridSpec&) = default;
};

// A = [A(1); A(2); ...; A(L)] over one shared column index set.
class StackedSystem {
public:
    StackedSystem(std::shared_ptr<const IndexSet> set, std::uint64_t seed)
        : set_(std::move(set)), offsets_{0} {
        if (!set_) throw DomainError("stacked system needs an index set");
        lgrid_.seed = seed;
        lgrid_.target_N = set_->size();
        lgrid_.degree_cap = set_->max_exponent();
    }

    void add_block(AliasingMatrix block) {
        if (block.n_cols() != set_->size())
            throw DimensionError("block column count does not match the index set");
        if (block.grid().dim() != set_->dim())
            throw DimensionError("block grid dimension does not match the index set");
        for (auto p : block.grid().counts())
            if (p > static_cast<std::uint64_t>(lgrid_.degree_cap) + 1)
                throw DomainError("grid resolution exceeds degree cap + 1");
        offsets_.push_back(offsets_.back() + block.n_rows());
        lgrid_.grids.push_back(block.grid());
        blocks_.push_back(std::move(block));
        kappa_.reset();
    }

    [[nodiscard]] const IndexSet& index_set() const noexcept { return *set_; }
    [[nodiscard]] const std::shared_ptr<const IndexSet>& index_set_ptr() const noexcept { return set_; }
    [[nodiscard]] std::size_t n_cols() const noexcept { return set_->size(); }
    [[nodiscard]] std::size_t total_rows() const noexcept { return offsets_.back(); }
    [[nodiscard]] std::size_t num_blocks() const noexcept { return blocks_.size(); }
    [[nodiscard]] const std::vector<AliasingMatrix>& blocks() const noexcept { return blocks_; }
    [[nodiscard]] const AliasingMatrix& block(std::size_t l) const { return blocks_.at(l); }
    [[nodiscard]] std::size_t row_offset(std::size_t l) const { return offsets_.at(l); }
    [[nodiscard]] const LGridSpec& lgrid() const noexcept { return lgrid_; }

    [[nodiscard]] std::size_t nnz() const noexcept {
        std::size_t total = 0;
        for (const auto& b : blocks_) total += b.nnz();
        return total;
    }

    [[nodiscard]] std::optional<double> kappa() const noexcept { return kappa_; }
    void set_kappa(double kappa) { kappa_ = kappa; }

    // Columns with no entry in any block; any such column makes A rank deficient.
    [[nodiscard]] std::size_t empty_columns() const {
        std::vector<bool> seen(n_cols(), false);
        for (const auto& b : blocks_)
            for (auto c : b.cols()) seen[c] = true;
        return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
    }

    friend bool operator==(const StackedSystem& a, const StackedSystem& b) {
        const bool same_kappa = a.kappa_.has_value() == b.kappa_.has_value() &&
                                (!a.kappa_ || std::bit_cast<std::uint64_t>(*a.kappa_) ==
                                                  std::bit_cast<std::uint64_t>(*b.kappa_));
        return *a.set_ == *b.set_ && a.blocks_ == b.blocks_ && a.lgrid_ == b.lgrid_ && same_kappa;
    }

private:
    std::shared_ptr<const IndexSet> set_;
    std::vector<AliasingMatrix> blocks_;
    std::vector<std::size_t> offsets_;
    LGridSpec lgrid_;
    std::optional<double> kappa_;
};

} // namespace fct
