#pragma once

// Operators over the stacked aliasing system and conjugate gradients on the
// normal equations A^T A c = A^T b.

#include "fct/errors.hpp"
#include "fct/stacked_system.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fct {

template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const double> in, std::span<double> out) {
    { op.rows() } -> std::convertible_to<std::size_t>;
    { op.cols() } -> std::convertible_to<std::size_t>;
    op.apply(in, out);
    op.apply_adjoint(in, out);
};

// Operators that can apply A^T A without materializing A c.
template <class Op>
concept NormalOperator = LinearOperator<Op> && requires(const Op& op, std::span<const double> in,
                                                        std::span<double> out) {
    op.apply_normal(in, out);
};

class StackedOperator {
public:
    explicit StackedOperator(const StackedSystem& sys) : sys_(&sys) {
        for (const auto& b : sys.blocks()) max_block_rows_ = std::max(max_block_rows_, b.n_rows());
    }

    [[nodiscard]] std::size_t rows() const noexcept { return sys_->total_rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return sys_->n_cols(); }
    [[nodiscard]] const StackedSystem& system() const noexcept { return *sys_; }

    // Scatter: out[offset_l + row] += value * c[col], blocks in fixed order.
    void apply(std::span<const double> c, std::span<double> out) const {
        check(c.size() == cols() && out.size() == rows(), "apply: length mismatch");
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t l = 0; l < sys_->num_blocks(); ++l) {
            const auto& b = sys_->block(l);
            double* y = out.data() + sys_->row_offset(l);
            const auto cols = b.cols();
            const auto rows = b.rows();
            const auto vals = b.values();
            for (std::size_t e = 0; e < vals.size(); ++e) y[rows[e]] += vals[e] * c[cols[e]];
        }
    }

    void apply_adjoint(std::span<const double> r, std::span<double> out) const {
        check(r.size() == rows() && out.size() == cols(), "apply_adjoint: length mismatch");
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t l = 0; l < sys_->num_blocks(); ++l)
            accumulate_block_adjoint(l, r.subspan(sys_->row_offset(l), sys_->block(l).n_rows()), out);
    }

    // out += A(l)^T r_l for one block's slice of the right-hand side.
    void accumulate_block_adjoint(std::size_t l, std::span<const double> r_l, std::span<double> out) const {
        const auto& b = sys_->block(l);
        const auto cols = b.cols();
        const auto rows = b.rows();
        const auto vals = b.values();
        for (std::size_t e = 0; e < vals.size(); ++e) out[cols[e]] += vals[e] * r_l[rows[e]];
    }

    // A^T A x block by block through a scratch buffer; only touched rows are reset.
    void apply_normal(std::span<const double> x, std::span<double> out) const {
        check(x.size() == cols() && out.size() == cols(), "apply_normal: length mismatch");
        std::fill(out.begin(), out.end(), 0.0);
        scratch_.assign(max_block_rows_, 0.0);
        for (std::size_t l = 0; l < sys_->num_blocks(); ++l) {
            const auto& b = sys_->block(l);
            const auto cols = b.cols();
            const auto rows = b.rows();
            const auto vals = b.values();
            for (std::size_t e = 0; e < vals.size(); ++e) scratch_[rows[e]] += vals[e] * x[cols[e]];
            for (std::size_t e = 0; e < vals.size(); ++e) out[cols[e]] += vals[e] * scratch_[rows[e]];
            for (std::size_t e = 0; e < vals.size(); ++e) scratch_[rows[e]] = 0.0;
        }
    }

    // diag(A^T A)
    [[nodiscard]] std::vector<double> normal_diagonal() const {
        std::vector<double> d(cols(), 0.0);
        for (const auto& b : sys_->blocks()) {
            const auto cols = b.cols();
            const auto vals = b.values();
            for (std::size_t e = 0; e < vals.size(); ++e) d[cols[e]] += vals[e] * vals[e];
        }
        return d;
    }

    // Exact structural screen: every column needs an entry, and the stacked
    // matrix needs at least as many distinct nonzero rows as columns.
    [[nodiscard]] bool structurally_deficient() const {
        if (sys_->empty_columns() > 0) return true;
        std::size_t distinct_rows = 0;
        std::vector<std::uint64_t> rows;
        for (const auto& b : sys_->blocks()) {
            rows.assign(b.rows().begin(), b.rows().end());
            std::sort(rows.begin(), rows.end());
            distinct_rows += static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
        }
        return distinct_rows < cols();
    }

private:
    static void check(bool ok, const char* what) {
        if (!ok) throw DimensionError(what);
    }

    const StackedSystem* sys_;
    std::size_t max_block_rows_ = 0;
    mutable std::vector<double> scratch_;
};

// Dense operator, used by the RLSI baseline.
class DenseOperator {
public:
    explicit DenseOperator(Eigen::MatrixXd matrix) : m_(std::move(matrix)) {}

    [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    [[nodiscard]] std::size_t cols() const noexcept { return static_cast<std::size_t>(m_.cols()); }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return m_; }

    void apply(std::span<const double> c, std::span<double> out) const {
        if (c.size() != cols() || out.size() != rows()) throw DimensionError("apply: length mismatch");
        Eigen::Map<Eigen::VectorXd>(out.data(), m_.rows()) =
            m_ * Eigen::Map<const Eigen::VectorXd>(c.data(), m_.cols());
    }

    void apply_adjoint(std::span<const double> r, std::span<double> out) const {
        if (r.size() != rows() || out.size() != cols()) throw DimensionError("apply_adjoint: length mismatch");
        Eigen::Map<Eigen::VectorXd>(out.data(), m_.cols()) =
            m_.transpose() * Eigen::Map<const Eigen::VectorXd>(r.data(), m_.rows());
    }

    [[nodiscard]] Eigen::MatrixXd gram() const { return m_.transpose() * m_; }

    [[nodiscard]] std::vector<double> normal_diagonal() const {
        std::vector<double> d(cols());
        for (Eigen::Index j = 0; j < m_.cols(); ++j) d[static_cast<std::size_t>(j)] = m_.col(j).squaredNorm();
        return d;
    }

private:
    Eigen::MatrixXd m_;
};

template <LinearOperator Op>
std::vector<double> apply(const Op& op, std::span<const double> c) {
    std::vector<double> out(op.rows());
    op.apply(c, out);
    return out;
}

template <LinearOperator Op>
std::vector<double> apply_adjoint(const Op& op, std::span<const double> r) {
    std::vector<double> out(op.cols());
    op.apply_adjoint(r, out);
    return out;
}

inline std::vector<double> apply(const StackedSystem& sys, std::span<const double> c) {
    return fct::apply(StackedOperator(sys), c);
}

inline std::vector<double> apply_adjoint(const StackedSystem& sys, std::span<const double> r) {
    return fct::apply_adjoint(StackedOperator(sys), r);
}

template <LinearOperator Op>
void apply_normal(const Op& op, std::span<const double> x, std::span<double> out) {
    if constexpr (NormalOperator<Op>) {
        op.apply_normal(x, out);
    } else {
        std::vector<double> tmp(op.rows());
        op.apply(x, tmp);
        op.apply_adjoint(tmp, out);
    }
}

struct CgReport {
    std::size_t iterations = 0;
    double relative_residual = 0.0; // ||A^T (b - A c)|| / ||A^T b||
    bool converged = false;
    double wall_time = 0.0;         // seconds
};

struct CgOptions {
    double tol = 1e-3;
    std::size_t max_iter = 0; // 0 means 10 * n_cols
    bool jacobi = false;
    // Called after every iteration with the current iterate.
    std::function<void(std::size_t, std::span<const double>)> on_iterate;
};

struct CgResult {
    std::vector<double> coefficients;
    CgReport report;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

} // namespace detail

// CG on A^T A c = rhs with rhs = A^T b already formed. Starts from zero.
// The recurrence residual is checked against the true normal residual on
// convergence and CG restarts from the current iterate if they disagree.
template <LinearOperator Op>
CgResult solve_normal_cg_rhs(const Op& op, std::span<const double> rhs, const CgOptions& opts = {}) {
    using detail::dot;
    using detail::norm2;
    if (!(opts.tol > 0.0)) throw DomainError("CG tolerance must be positive");
    const std::size_t n = op.cols();
    if (rhs.size() != n) throw DimensionError("normal right-hand side has the wrong length");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t max_iter = opts.max_iter ? opts.max_iter : 10 * std::max<std::size_t>(n, 1);

    CgResult result;
    result.coefficients.assign(n, 0.0);
    auto& x = result.coefficients;
    auto& rep = result.report;

    const double rhs_norm = norm2(rhs);
    auto finish = [&] {
        rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return result;
    };
    if (!std::isfinite(rhs_norm)) throw CgBreakdownError("CG right-hand side is not finite");
    if (rhs_norm == 0.0) {
        rep.converged = true;
        return finish();
    }

    std::vector<double> inv_diag;
    if (opts.jacobi) {
        if constexpr (requires { op.normal_diagonal(); }) {
            inv_diag = op.normal_diagonal();
            for (auto& v : inv_diag) v = v > 0.0 ? 1.0 / v : 1.0;
        }
    }
    auto precondition = [&](std::span<const double> r, std::span<double> z) {
        if (inv_diag.empty()) std::copy(r.begin(), r.end(), z.begin());
        else for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    };

    std::vector<double> r(rhs.begin(), rhs.end()), z(n), p(n), q(n);
    constexpr int kMaxRestarts = 5;
    for (int restart = 0; restart <= kMaxRestarts; ++restart) {
        precondition(r, z);
        p = z;
        double rz = dot(r, z);
        double rel = norm2(r) / rhs_norm;
        bool stalled = false;
        while (rel > opts.tol && rep.iterations < max_iter) {
            apply_normal(op, p, q);
            const double pq = dot(p, q);
            if (!std::isfinite(pq)) throw CgBreakdownError("CG breakdown: non-finite curvature");
            if (pq <= 0.0) {
                stalled = true;
                break;
            }
            const double alpha = rz / pq;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            ++rep.iterations;
            rel = norm2(r) / rhs_norm;
            if (!std::isfinite(rel)) throw CgBreakdownError("CG breakdown: residual became NaN");
            if (opts.on_iterate) opts.on_iterate(rep.iterations, x);
            precondition(r, z);
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
        // true normal residual
        apply_normal(op, x, q);
        for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
        rep.relative_residual = norm2(r) / rhs_norm;
        if (rep.relative_residual <= opts.tol) {
            rep.converged = true;
            break;
        }
        if (stalled || rep.iterations >= max_iter) break;
    }
    return finish();
}

template <LinearOperator Op>
CgResult solve_normal_cg(const Op& op, std::span<const double> b, const CgOptions& opts = {}) {
    if (b.size() != op.rows()) throw DimensionError("right-hand side has the wrong length");
    std::vector<double> rhs(op.cols());
    op.apply_adjoint(b, rhs);
    return solve_normal_cg_rhs(op, rhs, opts);
}

inline CgResult solve_normal_cg(const StackedSystem& sys, std::span<const double> b, const CgOptions& opts = {}) {
    return solve_normal_cg(StackedOperator(sys), b, opts);
}

} // namespace fct
