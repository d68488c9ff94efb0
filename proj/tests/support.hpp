#pragma once

#include "fct/stacked_system.hpp"

#include <Eigen/Dense>

#include <memory>

namespace fct::testing {

// Dense copy of the stacked matrix, straight from the stored entries.
inline Eigen::MatrixXd dense_of(const StackedSystem& sys) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.total_rows()),
                                              static_cast<Eigen::Index>(sys.n_cols()));
    for (std::size_t l = 0; l < sys.num_blocks(); ++l) {
        const auto& b = sys.block(l);
        for (std::size_t e = 0; e < b.nnz(); ++e)
            A(static_cast<Eigen::Index>(sys.row_offset(l) + b.rows()[e]), b.cols()[e]) += b.values()[e];
    }
    return A;
}

inline std::shared_ptr<const IndexSet> shared_set(std::size_t D, Exponent d, Norm s) {
    return std::make_shared<const IndexSet>(enumerate_index_set(D, d, s));
}

} // namespace fct::testing
