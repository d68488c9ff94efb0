#pragma once

// Randomized L-grids: per-grid sampling rates and the stacked aliasing system.

#include "fct/aliasing.hpp"
#include "fct/chebgrid.hpp"
#include "fct/condition.hpp"
#include "fct/errors.hpp"
#include "fct/multiindex.hpp"
#include "fct/rng.hpp"
#include "fct/stacked_system.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <vector>

namespace fct {

// Visit dimensions in random order, drawing P_i uniformly from {1..d+1}; once
// the running product exceeds N the remaining dimensions keep a single point.
inline GridSpec select_sampling_rates(std::size_t N, std::size_t D, Exponent d, RngStream& rng) {
    if (N == 0) throw DomainError("sampling rates need N >= 1");
    if (D == 0) throw DimensionError("sampling rates need D >= 1");
    std::vector<std::uint32_t> counts(D, 1);
    const auto order = rng.permutation(D);
    std::uint64_t product = 1;
    for (auto i : order) {
        counts[i] = static_cast<std::uint32_t>(rng.uniform_int(1, static_cast<std::uint64_t>(d) + 1));
        product *= counts[i];
        if (product > N) break;
    }
    return GridSpec(std::move(counts));
}

enum class LMode { fixed, adaptive };

// When to attach a condition estimate to a fixed-mode system.
enum class KappaPolicy { never, dense_only, always };

struct BuildOptions {
    LMode mode = LMode::fixed;
    std::size_t L = 0;          // fixed L, or L_min in adaptive mode; 0 means 3 D
    std::size_t L_max = 0;      // adaptive only; 0 means 10 D
    double kappa_max = 1e4;
    std::uint64_t seed = 0;
    KappaPolicy kappa_policy = KappaPolicy::dense_only;
    ConditionOptions condition{};
};

inline std::size_t resolved_L(const BuildOptions& o, std::size_t D) { return o.L ? o.L : 3 * D; }
inline std::size_t resolved_L_max(const BuildOptions& o, std::size_t D) {
    return std::max(o.L_max ? o.L_max : 10 * D, resolved_L(o, D));
}

inline StackedSystem build_system(std::shared_ptr<const IndexSet> set, const BuildOptions& opts) {
    if (!set || set->empty()) throw DomainError("build_system needs a non-empty index set");
    if (!(opts.kappa_max > 1.0)) throw DomainError("kappa_max must exceed 1");
    const std::size_t D = set->dim();
    const std::size_t N = set->size();
    const Exponent d = set->max_exponent();
    const std::size_t L = resolved_L(opts, D);
    if (L == 0) throw DomainError("L must be >= 1");

    RngStream rng(opts.seed);
    StackedSystem sys(set, opts.seed);
    auto add_one = [&] { sys.add_block(assemble_block(select_sampling_rates(N, D, d, rng), *set)); };

    if (opts.mode == LMode::fixed) {
        for (std::size_t l = 0; l < L; ++l) add_one();
        const bool estimate = opts.kappa_policy == KappaPolicy::always ||
                              (opts.kappa_policy == KappaPolicy::dense_only && N <= opts.condition.dense_limit);
        if (estimate) sys.set_kappa(estimate_condition(sys, opts.condition).kappa);
        return sys;
    }

    const std::size_t L_max = resolved_L_max(opts, D);
    ConditionEstimate last;
    while (sys.num_blocks() < L_max) {
        add_one();
        if (sys.num_blocks() < L) continue;
        last = estimate_condition(sys, opts.condition);
        if (last.full_rank && last.kappa <= opts.kappa_max) {
            sys.set_kappa(last.kappa);
            return sys;
        }
    }
    std::ostringstream msg;
    msg << "conditioning failure: L_max = " << L_max << " reached with kappa estimate " << last.kappa
        << " (limit " << opts.kappa_max << "), rank estimate " << last.rank << " of " << N;
    throw ConditioningError(msg.str(), sys.num_blocks(), last.kappa, last.rank);
}

inline StackedSystem build_system(const IndexSet& set, const BuildOptions& opts) {
    return build_system(std::make_shared<const IndexSet>(set), opts);
}

} // namespace fct
