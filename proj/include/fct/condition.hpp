#pragma once

// Singular-value extremes of the stacked aliasing matrix.

#include "fct/errors.hpp"
#include "fct/rng.hpp"
#include "fct/solver.hpp"
#include "fct/stacked_system.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace fct {

enum class ConditionMethod { automatic, dense, iterative };

struct ConditionOptions {
    ConditionMethod method = ConditionMethod::automatic;
    std::size_t dense_limit = 2000;  // columns; at or below this the dense path runs
    double tol = 1e-7;               // relative change that ends power / Lanczos iterations
    std::size_t max_iter = 0;        // 0 means min(4 n + 50, 20000)
    std::uint64_t seed = 0x5eed;
};

struct ConditionEstimate {
    double sigma_max = 0.0;
    double sigma_min = 0.0;
    double kappa = std::numeric_limits<double>::infinity();
    std::size_t rank = 0;
    bool full_rank = false;
    ConditionMethod method = ConditionMethod::dense;
    std::size_t iterations = 0;
};

namespace detail {

// Eigenvalues lambda of A^T A at or below this are treated as zero. The Gram
// matrix loses the low half of the digits, so the cut sits near n eps.
inline double gram_rank_threshold(std::size_t n, double lambda_max) {
    const double rel = std::max(1e-13, 10.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon());
    return rel * lambda_max;
}

inline ConditionEstimate from_gram_eigenvalues(const Eigen::VectorXd& lambda) {
    ConditionEstimate est;
    est.method = ConditionMethod::dense;
    const auto n = static_cast<std::size_t>(lambda.size());
    if (n == 0) return est;
    const double lmax = std::max(lambda.maxCoeff(), 0.0);
    const double lmin = std::max(lambda.minCoeff(), 0.0);
    est.sigma_max = std::sqrt(lmax);
    est.sigma_min = std::sqrt(lmin);
    if (lmax == 0.0) return est;
    const double cut = gram_rank_threshold(n, lmax);
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        if (lambda[i] > cut) ++est.rank;
    est.full_rank = est.rank == n;
    est.kappa = est.full_rank ? est.sigma_max / est.sigma_min : std::numeric_limits<double>::infinity();
    return est;
}

} // namespace detail

// A^T A of the stacked system. Entries of one block that share a row couple
// their columns; there is at most one entry per column per block.
inline Eigen::MatrixXd gram_matrix(const StackedSystem& sys) {
    const std::size_t n = sys.n_cols();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<std::size_t> order;
    for (const auto& b : sys.blocks()) {
        const auto rows = b.rows();
        const auto cols = b.cols();
        const auto vals = b.values();
        order.resize(vals.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return rows[x] < rows[y]; });
        for (std::size_t s = 0; s < order.size();) {
            std::size_t e = s;
            while (e < order.size() && rows[order[e]] == rows[order[s]]) ++e;
            for (std::size_t i = s; i < e; ++i)
                for (std::size_t j = s; j < e; ++j)
                    G(cols[order[i]], cols[order[j]]) += vals[order[i]] * vals[order[j]];
            s = e;
        }
    }
    return G;
}

inline ConditionEstimate condition_from_gram(const Eigen::MatrixXd& gram) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw Error("eigenvalue solver failed on the Gram matrix");
    return detail::from_gram_eigenvalues(eig.eigenvalues());
}

inline ConditionEstimate estimate_condition_dense(const StackedSystem& sys) {
    return condition_from_gram(gram_matrix(sys));
}

// sigma_max by power iteration on A^T A. sigma_min from the smallest Ritz
// value of the Lanczos tridiagonal implied by CG's alpha/beta on A^T A x = r.
template <LinearOperator Op>
ConditionEstimate estimate_condition_iterative(const Op& op, const ConditionOptions& opts = {}) {
    using detail::dot;
    using detail::norm2;
    const std::size_t n = op.cols();
    ConditionEstimate est;
    est.method = ConditionMethod::iterative;
    if (n == 0) return est;
    const std::size_t max_iter = opts.max_iter ? opts.max_iter : std::min<std::size_t>(4 * n + 50, 20000);
    RngStream rng(opts.seed);

    std::vector<double> v(n), w(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    double lmax = 0.0;
    {
        double nv = norm2(v);
        for (auto& x : v) x /= nv;
        for (std::size_t it = 0; it < max_iter; ++it) {
            apply_normal(op, v, w);
            const double next = dot(v, w);
            const double nw = norm2(w);
            ++est.iterations;
            if (!std::isfinite(nw)) throw CgBreakdownError("power iteration produced a non-finite vector");
            if (nw == 0.0) break;
            for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
            const bool done = it > 0 && std::abs(next - lmax) <= opts.tol * next;
            lmax = next;
            if (done) break;
        }
    }
    est.sigma_max = std::sqrt(std::max(lmax, 0.0));
    if (lmax <= 0.0) return est;

    // Lanczos through CG: T_jj = 1/alpha_j + beta_{j-1}/alpha_{j-1}, T_j,j+1 = sqrt(beta_j)/alpha_j.
    std::vector<double> r(n), p(n), q(n);
    for (auto& x : r) x = rng.uniform(-1.0, 1.0);
    p = r;
    double rr = dot(r, r);
    const double rr0 = rr;
    std::vector<double> alphas, betas;
    double lmin = lmax;
    double last_check = std::numeric_limits<double>::infinity();
    auto smallest_ritz = [&] {
        const std::size_t k = alphas.size();
        Eigen::VectorXd diag(static_cast<Eigen::Index>(k));
        Eigen::VectorXd sub(static_cast<Eigen::Index>(k > 0 ? k - 1 : 0));
        for (std::size_t j = 0; j < k; ++j) {
            double t = 1.0 / alphas[j];
            if (j > 0) t += betas[j - 1] / alphas[j - 1];
            diag[static_cast<Eigen::Index>(j)] = t;
            if (j + 1 < k) sub[static_cast<Eigen::Index>(j)] = std::sqrt(betas[j]) / alphas[j];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
        eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
        return eig.eigenvalues().minCoeff();
    };
    const double floor = detail::gram_rank_threshold(n, lmax);
    for (std::size_t it = 0; it < max_iter; ++it) {
        apply_normal(op, p, q);
        const double pq = dot(p, q);
        ++est.iterations;
        if (!std::isfinite(pq)) throw CgBreakdownError("Lanczos breakdown: non-finite curvature");
        if (pq <= 0.0) {
            lmin = 0.0;
            break;
        }
        const double alpha = rr / pq;
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * q[i];
        const double rr_next = dot(r, r);
        alphas.push_back(alpha);
        betas.push_back(rr_next / rr);
        rr = rr_next;
        const bool exhausted = rr <= 1e-30 * rr0;
        if (exhausted || alphas.size() % 10 == 0 || alphas.size() == n) {
            lmin = smallest_ritz();
            if (exhausted || alphas.size() >= n) break;
            if (lmin <= floor) break;
            if (std::abs(last_check - lmin) <= opts.tol * lmin) break;
            last_check = lmin;
        }
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + betas.back() * p[i];
    }
    if (alphas.size() % 10 != 0 && !alphas.empty()) lmin = std::min(lmin, smallest_ritz());
    lmin = std::max(lmin, 0.0);
    est.sigma_min = std::sqrt(lmin);
    est.full_rank = lmin > floor;
    est.rank = est.full_rank ? n : n - 1;
    est.kappa = est.full_rank ? est.sigma_max / est.sigma_min : std::numeric_limits<double>::infinity();
    return est;
}

inline ConditionEstimate estimate_condition(const StackedSystem& sys, const ConditionOptions& opts = {}) {
    if (sys.num_blocks() == 0) throw DomainError("condition estimate needs at least one block");
    const std::size_t n = sys.n_cols();
    StackedOperator op(sys);
    // Structural deficiency is exact and cheap; no need for a numeric answer.
    if (op.structurally_deficient()) {
        ConditionEstimate est;
        est.method = opts.method == ConditionMethod::iterative ||
                             (opts.method == ConditionMethod::automatic && n > opts.dense_limit)
                         ? ConditionMethod::iterative
                         : ConditionMethod::dense;
        est.rank = n - std::min(n, std::max<std::size_t>(sys.empty_columns(), 1));
        const auto diag = op.normal_diagonal();
        est.sigma_max = std::sqrt(*std::max_element(diag.begin(), diag.end()));
        return est;
    }
    const bool dense = opts.method == ConditionMethod::dense ||
                       (opts.method == ConditionMethod::automatic && n <= opts.dense_limit);
    return dense ? estimate_condition_dense(sys) : estimate_condition_iterative(op, opts);
}

} // namespace fct
