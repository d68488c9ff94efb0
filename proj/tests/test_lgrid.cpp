#include "fct/condition.hpp"
#include "fct/lgrid.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace fct;
using fct::testing::dense_of;
using fct::testing::shared_set;

TEST(SamplingRates, RangeAndStoppingRule) {
    RngStream rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t N = 1 + rng.below(400);
        const std::size_t D = 1 + rng.below(12);
        const auto d = static_cast<Exponent>(rng.below(8));
        auto g = select_sampling_rates(N, D, d, rng);
        ASSERT_EQ(g.dim(), D);
        std::uint64_t product = 1;
        for (auto p : g.counts()) {
            EXPECT_GE(p, 1u);
            EXPECT_LE(p, d + 1);
            product *= p;
        }
        // once the product passes N the rest stay at one point, so some
        // factor > 1 was the one that crossed
        if (product > N) {
            bool crossed = false;
            for (auto p : g.counts())
                if (p > 1 && product / p <= N) crossed = true;
            EXPECT_TRUE(crossed);
        }
    }
}

TEST(SamplingRates, Deterministic) {
    RngStream a(42), b(42);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(select_sampling_rates(100, 6, 4, a), select_sampling_rates(100, 6, 4, b));
    RngStream rng(1);
    EXPECT_THROW(select_sampling_rates(0, 2, 2, rng), DomainError);
    EXPECT_THROW(select_sampling_rates(5, 0, 2, rng), DimensionError);
}

TEST(BuildSystem, FixedModeShape) {
    auto set = shared_set(4, 3, Norm::one);
    BuildOptions o;
    o.seed = 9;
    auto sys = build_system(set, o);
    EXPECT_EQ(sys.num_blocks(), 12u);
    EXPECT_EQ(sys.n_cols(), 35u);
    std::size_t rows = 0;
    for (const auto& g : sys.lgrid().grids) rows += g.total_points();
    EXPECT_EQ(sys.total_rows(), rows);
    EXPECT_LE(sys.total_rows(), sys.num_blocks() * set->size() * (set->degree() + 1));
    EXPECT_TRUE(sys.kappa().has_value());
    for (const auto& b : sys.blocks()) EXPECT_LE(b.nnz(), set->size());
}

TEST(BuildSystem, SameSeedSameSystem) {
    auto set = shared_set(5, 3, Norm::two);
    BuildOptions o;
    o.seed = 77;
    EXPECT_EQ(build_system(set, o), build_system(set, o));
    BuildOptions other = o;
    other.seed = 78;
    EXPECT_FALSE(build_system(set, o) == build_system(set, other));
}

TEST(BuildSystem, AdaptiveReachesFullRank) {
    auto set = shared_set(3, 4, Norm::one);
    BuildOptions o;
    o.mode = LMode::adaptive;
    o.L_max = 200;
    o.seed = 5;
    auto sys = build_system(set, o);
    ASSERT_TRUE(sys.kappa().has_value());
    EXPECT_LE(*sys.kappa(), o.kappa_max);
    EXPECT_EQ(sys.empty_columns(), 0u);
    EXPECT_GE(sys.num_blocks(), 9u);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense_of(sys));
    const auto s = svd.singularValues();
    EXPECT_NEAR(*sys.kappa(), s(0) / s(s.size() - 1), 1e-8 * *sys.kappa());
}

TEST(BuildSystem, AdaptiveFailureCarriesDiagnostics) {
    // column 0 has squared norm L and column (0,1) at most L/4, so kappa >= 2
    auto set = shared_set(2, 2, Norm::one);
    BuildOptions o;
    o.mode = LMode::adaptive;
    o.L = 1;
    o.L_max = 3;
    o.kappa_max = 1.5;
    try {
        build_system(set, o);
        ADD_FAILURE() << "expected a conditioning failure";
    } catch (const ConditioningError& e) {
        EXPECT_EQ(e.blocks(), 3u);
        EXPECT_GE(e.kappa(), 2.0);
        EXPECT_LE(e.rank_estimate(), set->size());
    }
}

TEST(BuildSystem, RejectsBadOptions) {
    auto set = shared_set(2, 2, Norm::one);
    BuildOptions o;
    o.kappa_max = 1.0;
    EXPECT_THROW(build_system(set, o), DomainError);
}

TEST(Condition, GramMatchesDense) {
    auto set = shared_set(3, 3, Norm::inf);
    BuildOptions o;
    o.seed = 12;
    o.kappa_policy = KappaPolicy::never;
    auto sys = build_system(set, o);
    const auto A = dense_of(sys);
    EXPECT_LT((gram_matrix(sys) - A.transpose() * A).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Condition, IdentityLikeBlock) {
    // one grid P = d+1 in D = 1: diag(1, 1/2, ..., 1/2)
    auto set = shared_set(1, 3, Norm::one);
    StackedSystem sys(set, 0);
    sys.add_block(assemble_block(GridSpec{4}, *set));
    auto est = estimate_condition(sys);
    EXPECT_TRUE(est.full_rank);
    EXPECT_EQ(est.rank, 4u);
    EXPECT_NEAR(est.kappa, 2.0, 1e-12);
    ConditionOptions it;
    it.method = ConditionMethod::iterative;
    EXPECT_NEAR(estimate_condition(sys, it).kappa, 2.0, 1e-6);
}

TEST(Condition, StructuralDeficiency) {
    auto set = shared_set(1, 3, Norm::one);
    StackedSystem sys(set, 0);
    sys.add_block(assemble_block(GridSpec{2}, *set));  // column m=2 vanishes
    auto est = estimate_condition(sys);
    EXPECT_FALSE(est.full_rank);
    EXPECT_TRUE(std::isinf(est.kappa));
    EXPECT_EQ(est.rank, 3u);
}

TEST(Condition, DenseAndIterativeAgree) {
    int compared = 0;
    for (std::uint64_t seed = 0; seed < 30 && compared < 8; ++seed) {
        for (auto [D, d] : {std::pair<std::size_t, Exponent>{2, 6}, {3, 4}, {4, 3}, {5, 3}}) {
            auto set = shared_set(D, d, Norm::one);
            BuildOptions o;
            o.seed = seed;
            o.L = 6 * D;
            o.kappa_policy = KappaPolicy::never;
            auto sys = build_system(set, o);
            ConditionOptions dense, iter;
            dense.method = ConditionMethod::dense;
            iter.method = ConditionMethod::iterative;
            iter.tol = 1e-10;
            auto a = estimate_condition(sys, dense);
            if (!a.full_rank) continue;
            auto b = estimate_condition(sys, iter);
            EXPECT_TRUE(b.full_rank);
            EXPECT_NEAR(b.kappa, a.kappa, 0.05 * a.kappa) << D << ' ' << d << ' ' << seed;
            ++compared;
        }
    }
    EXPECT_GE(compared, 8);
}

TEST(Condition, SmallestSingularValueAgainstSvd) {
    auto set = shared_set(2, 5, Norm::one);
    BuildOptions o;
    o.mode = LMode::adaptive;
    o.L_max = 100;
    o.seed = 3;
    auto sys = build_system(set, o);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense_of(sys));
    const auto s = svd.singularValues();
    auto est = estimate_condition(sys);
    EXPECT_NEAR(est.sigma_max, s(0), 1e-10);
    EXPECT_NEAR(est.sigma_min, s(s.size() - 1), 1e-10);
}
