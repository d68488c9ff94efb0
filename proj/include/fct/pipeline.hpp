#pragma once

// End-to-end coefficient recovery: the FCT least-squares pipeline, the
// full-tensor DCT baseline, the dense random least-squares baseline (RLSI),
// and error metrics.

#include "fct/cache.hpp"
#include "fct/chebgrid.hpp"
#include "fct/condition.hpp"
#include "fct/errors.hpp"
#include "fct/lgrid.hpp"
#include "fct/multiindex.hpp"
#include "fct/rng.hpp"
#include "fct/solver.hpp"
#include "fct/stacked_system.hpp"
#include "fct/transform.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fct {

inline constexpr std::uint64_t kDefaultBudgetBytes = std::uint64_t{4} << 30;

struct PhaseTimings {
    double build = 0.0;      // seconds
    double sample = 0.0;
    double transform = 0.0;
    double solve = 0.0;

    [[nodiscard]] double total() const noexcept { return build + sample + transform + solve; }
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline std::uint64_t checked_bytes(unsigned __int128 v) {
    if (v > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(v);
}

} // namespace detail

struct FctConfig {
    std::shared_ptr<const IndexSet> set;
    BuildOptions build{};
    double cg_tol = 1e-3;
    std::size_t max_iter = 0;   // 0 means 10 N
    bool jacobi = false;
    std::optional<std::filesystem::path> cache_dir;  // empty disables the cache
    DctPath dct_path = DctPath::automatic;
    std::uint64_t budget_bytes = kDefaultBudgetBytes;
    std::function<void(const std::string&)> log;
};

struct FctResult {
    std::shared_ptr<const ChebExpansion> expansion;
    CgReport cg;
    PhaseTimings timings;
    bool cache_hit = false;
    std::size_t L = 0;
    std::size_t total_samples = 0;
    std::optional<double> kappa;
};

// Allocation estimate for one FCT run: stored system, one grid buffer, and
// the CG work vectors.
inline std::uint64_t fct_memory_estimate(std::size_t N, std::size_t L, Exponent d) {
    using u128 = unsigned __int128;
    const u128 entries = static_cast<u128>(N) * L * (4 + 8 + 8);
    const u128 grid = static_cast<u128>(N) * (static_cast<u128>(d) + 1) * 8;
    const u128 vectors = static_cast<u128>(N) * 8 * 6;
    return detail::checked_bytes(entries + grid + vectors);
}

inline StackedSystem obtain_system(const FctConfig& cfg, bool& cache_hit) {
    cache_hit = false;
    if (!cfg.cache_dir) return build_system(cfg.set, cfg.build);
    const auto path = cache_path(*cfg.cache_dir, cache_key(*cfg.set, cfg.build));
    if (std::filesystem::exists(path)) {
        try {
            auto sys = cache_load(path, cfg.set);
            cache_hit = true;
            if (cfg.log) cfg.log("cache hit: " + path.string());
            return sys;
        } catch (const CacheError& err) {
            if (cfg.log) cfg.log(std::string("cache rejected, rebuilding: ") + err.what());
        }
    }
    auto sys = build_system(cfg.set, cfg.build);
    cache_store(path, sys);
    if (cfg.log) cfg.log("cache stored: " + path.string());
    return sys;
}

inline FctResult fct_approximate(const TargetFunction& f, const FctConfig& cfg) {
    if (!cfg.set || cfg.set->empty()) throw DomainError("FCT needs a non-empty index set");
    if (f.dim() != cfg.set->dim()) throw DimensionError("function and index set dimensions differ");
    const std::size_t N = cfg.set->size();
    const Exponent d = cfg.set->max_exponent();
    FctResult out;

    const std::size_t L_est =
        cfg.build.mode == LMode::fixed ? resolved_L(cfg.build, f.dim()) : resolved_L_max(cfg.build, f.dim());
    if (fct_memory_estimate(N, L_est, d) > cfg.budget_bytes)
        throw BudgetError("FCT memory estimate exceeds the budget");

    detail::Stopwatch build_clock;
    StackedSystem sys = obtain_system(cfg, out.cache_hit);
    out.timings.build = build_clock.seconds();
    out.L = sys.num_blocks();
    out.kappa = sys.kappa();

    StackedOperator op(sys);
    std::vector<double> rhs(N, 0.0);
    for (std::size_t l = 0; l < sys.num_blocks(); ++l) {
        const auto& grid = sys.block(l).grid();
        detail::Stopwatch sample_clock;
        SampleVector s = sample_on_grid(f, grid);
        out.timings.sample += sample_clock.seconds();
        detail::Stopwatch transform_clock;
        dct_forward_in_place(s.values, grid, cfg.dct_path);
        op.accumulate_block_adjoint(l, s.values, rhs);
        out.timings.transform += transform_clock.seconds();
        out.total_samples += grid.total_points();
    }
    if (static_cast<unsigned __int128>(out.total_samples) >
        static_cast<unsigned __int128>(out.L) * N * (static_cast<std::uint64_t>(d) + 1))
        throw Error("L-grid sample count exceeds L N (d + 1)");

    CgOptions cg;
    cg.tol = cfg.cg_tol;
    cg.max_iter = cfg.max_iter;
    cg.jacobi = cfg.jacobi;
    auto solved = solve_normal_cg_rhs(op, rhs, cg);
    out.timings.solve = solved.report.wall_time;
    out.cg = solved.report;
    out.expansion = std::make_shared<const ChebExpansion>(cfg.set, std::move(solved.coefficients));
    return out;
}

struct DctResult {
    std::shared_ptr<const ChebExpansion> expansion;
    PhaseTimings timings;
    std::size_t total_samples = 0;
};

// Peak bytes of dct_interpolate: sample tensor, coefficient vector, and the
// u32 index list of S^inf.
inline std::uint64_t dct_memory_estimate(std::size_t D, Exponent d) {
    using u128 = unsigned __int128;
    u128 G = 1;
    for (std::size_t i = 0; i < D; ++i) {
        G *= static_cast<u128>(d) + 1;
        if (G > (static_cast<u128>(1) << 80)) return std::numeric_limits<std::uint64_t>::max();
    }
    return detail::checked_bytes(G * (8 + 8 + 4 * static_cast<u128>(D)));
}

// Full tensor grid with d+1 points per dimension. The DCT output carries the
// aliasing weights (1/2 per nonzero exponent) which are divided out here.
inline DctResult dct_interpolate(const TargetFunction& f, Exponent d,
                                 std::uint64_t budget_bytes = kDefaultBudgetBytes,
                                 DctPath path = DctPath::automatic) {
    const std::size_t D = f.dim();
    const auto need = dct_memory_estimate(D, d);
    if (need > budget_bytes)
        throw BudgetError("full tensor DCT needs about " + std::to_string(need >> 20) + " MiB, budget is " +
                          std::to_string(budget_bytes >> 20) + " MiB");
    DctResult out;
    detail::Stopwatch build_clock;
    GridSpec grid(std::vector<std::uint32_t>(D, d + 1));
    auto set = std::make_shared<const IndexSet>(
        enumerate_index_set(D, d, Norm::inf, std::numeric_limits<std::uint64_t>::max()));
    out.timings.build = build_clock.seconds();

    detail::Stopwatch sample_clock;
    SampleVector s = sample_on_grid(f, grid);
    out.timings.sample = sample_clock.seconds();
    out.total_samples = grid.total_points();

    detail::Stopwatch transform_clock;
    dct_forward_in_place(s.values, grid, path);
    const auto strides = grid.strides();
    std::vector<double> coeffs(set->size());
    for (std::size_t j = 0; j < set->size(); ++j) {
        const auto n = (*set)[j];
        std::size_t row = 0;
        double scale = 1.0;
        for (std::size_t i = 0; i < D; ++i) {
            row += static_cast<std::size_t>(n[i]) * strides[i];
            if (n[i] != 0) scale *= 0.5;
        }
        coeffs[j] = s.values[row] / scale;
    }
    out.timings.transform = transform_clock.seconds();
    out.expansion = std::make_shared<const ChebExpansion>(std::move(set), std::move(coeffs));
    return out;
}

struct RlsiOptions {
    double C = 1.2;
    double kappa_max = 1e4;
    double cg_tol = 1e-3;
    std::size_t max_iter = 0;
    std::uint64_t seed = 0;
    std::size_t retries = 5;
    std::size_t kappa_gate_limit = 2000;  // columns; gating runs the dense Gram test
    std::uint64_t budget_bytes = kDefaultBudgetBytes;
};

struct RlsiResult {
    std::shared_ptr<const ChebExpansion> expansion;
    CgReport cg;
    PhaseTimings timings;
    std::optional<double> kappa;
    std::size_t attempts = 0;
    std::size_t total_samples = 0;
};

inline std::uint64_t rlsi_memory_estimate(std::size_t M, std::size_t N) {
    return detail::checked_bytes(static_cast<unsigned __int128>(M) * N * 8 +
                                 static_cast<unsigned __int128>(M + N) * 8 * 6);
}

// ceil(C N) distinct points of the (d+1)^D first-kind grid, dense B_ij =
// T_{n_j}(x_i), CG on the normal equations.
inline RlsiResult rlsi_approximate(const TargetFunction& f, std::shared_ptr<const IndexSet> set,
                                   const RlsiOptions& opts = {}) {
    if (!set || set->empty()) throw DomainError("RLSI needs a non-empty index set");
    if (f.dim() != set->dim()) throw DimensionError("function and index set dimensions differ");
    if (!(opts.C >= 1.0)) throw DomainError("RLSI oversampling factor C must be >= 1");
    const std::size_t D = set->dim();
    const std::size_t N = set->size();
    const Exponent d = set->max_exponent();
    const auto M = static_cast<std::size_t>(std::ceil(opts.C * static_cast<double>(N)));
    if (rlsi_memory_estimate(M, N) > opts.budget_bytes)
        throw BudgetError("dense RLSI matrix of " + std::to_string(M) + " x " + std::to_string(N) +
                          " exceeds the budget");

    RlsiResult out;
    const auto nodes = chebyshev_points(static_cast<std::size_t>(d) + 1);
    RngStream rng(opts.seed);
    detail::ChebTables tables(*set);
    Eigen::MatrixXd B;
    std::vector<double> points(M * D);
    const std::size_t attempts = std::max<std::size_t>(opts.retries, 1);
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < attempts && !accepted; ++attempt) {
        out.attempts = attempt + 1;
        detail::Stopwatch build_clock;
        const auto tuples = sample_distinct_tuples(D, d + 1, M, rng);
        for (std::size_t k = 0; k < tuples.size(); ++k) points[k] = nodes[tuples[k]];
        B.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(N));
        for (std::size_t i = 0; i < M; ++i) {
            tables.fill(std::span<const double>(points.data() + i * D, D));
            for (std::size_t j = 0; j < N; ++j) {
                const auto n = (*set)[j];
                double v = 1.0;
                for (std::size_t k = 0; k < D; ++k)
                    if (n[k] != 0) v *= tables(k, n[k]);
                B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            }
        }
        if (N <= opts.kappa_gate_limit) {
            const auto est = condition_from_gram(B.transpose() * B);
            out.kappa = est.kappa;
            accepted = est.full_rank && est.kappa <= opts.kappa_max;
        } else {
            out.kappa.reset();
            accepted = true;
        }
        out.timings.build += build_clock.seconds();
    }
    if (!accepted)
        throw RetryExhaustedError("RLSI: no well-conditioned sample set after " + std::to_string(attempts) +
                                  " draws (last kappa " + std::to_string(out.kappa.value_or(0.0)) + ")");

    detail::Stopwatch sample_clock;
    std::vector<double> values(M);
    for (std::size_t i = 0; i < M; ++i) {
        std::span<const double> x(points.data() + i * D, D);
        values[i] = f(x);
        if (!std::isfinite(values[i]))
            throw NonFiniteError("target function is not finite at sample point " + detail::format_point(x));
    }
    out.timings.sample = sample_clock.seconds();
    out.total_samples = M;

    DenseOperator op(std::move(B));
    CgOptions cg;
    cg.tol = opts.cg_tol;
    cg.max_iter = opts.max_iter;
    auto solved = solve_normal_cg(op, values, cg);
    out.timings.solve = solved.report.wall_time;
    out.cg = solved.report;
    out.expansion = std::make_shared<const ChebExpansion>(std::move(set), std::move(solved.coefficients));
    return out;
}

struct ErrorReport {
    std::optional<double> mean_l2_coeff_error;  // ||c - c~||_2 / N over the union support
    std::optional<double> linf_sample_error;    // max |f - p| over M random points
    std::size_t linf_points = 0;
};

// Coefficient error over the union of both supports, divided by the number of
// true coefficients.
inline double mean_l2_coefficient_error(const ChebExpansion& e, const ChebExpansion& truth) {
    if (e.dim() != truth.dim()) throw DimensionError("expansions have different dimensions");
    double sum = 0.0;
    const auto& es = e.index_set();
    const auto ec = e.coefficients();
    for (std::size_t j = 0; j < es.size(); ++j) {
        const double diff = ec[j] - truth.coefficient(es[j]);
        sum += diff * diff;
    }
    const auto& ts = truth.index_set();
    const auto tc = truth.coefficients();
    for (std::size_t j = 0; j < ts.size(); ++j)
        if (!position_of(es, ts[j])) sum += tc[j] * tc[j];
    return std::sqrt(sum) / static_cast<double>(truth.size());
}

// Max |f - p| over M points uniform in [-1,1]^D drawn from `seed`.
inline double linf_error(const ChebExpansion& e, const TargetFunction& f, std::size_t M, std::uint64_t seed) {
    if (e.dim() != f.dim()) throw DimensionError("expansion and function dimensions differ");
    const std::size_t D = e.dim();
    RngStream rng(seed);
    std::vector<double> points(M * D);
    for (auto& x : points) x = rng.uniform(-1.0, 1.0);
    const auto approx = evaluate_expansion(e, points);
    double worst = 0.0;
    for (std::size_t p = 0; p < M; ++p) {
        const double v = f(std::span<const double>(points.data() + p * D, D));
        worst = std::max(worst, std::abs(v - approx[p]));
    }
    return worst;
}

inline ErrorReport error_report(const ChebExpansion& e, const ChebExpansion* truth, const TargetFunction* f,
                                std::size_t M = 5000, std::uint64_t seed = 0) {
    if (!truth && !f) throw DomainError("error report needs a ground truth or a target function");
    ErrorReport r;
    if (truth) r.mean_l2_coeff_error = mean_l2_coefficient_error(e, *truth);
    if (M > 0) {
        r.linf_points = M;
        if (f) {
            r.linf_sample_error = linf_error(e, *f, M, seed);
        } else {
            auto shared = std::make_shared<const ChebExpansion>(*truth);
            r.linf_sample_error = linf_error(e, expansion_function(shared), M, seed);
        }
    }
    return r;
}

} // namespace fct
