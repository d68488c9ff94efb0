#include "fct/pipeline.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace fct;
using fct::testing::shared_set;

namespace {

FctConfig exact_config(std::shared_ptr<const IndexSet> set, std::uint64_t seed) {
    FctConfig cfg;
    cfg.set = std::move(set);
    cfg.build.mode = LMode::adaptive;
    cfg.build.L_max = 40 * cfg.set->dim();
    cfg.build.seed = seed;
    cfg.cg_tol = 1e-13;
    return cfg;
}

double max_coeff_diff(const ChebExpansion& a, const ChebExpansion& b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, std::abs(a.coefficients()[j] - b.coefficient(a.index_set()[j])));
    return worst;
}

} // namespace

TEST(Fct, RecoversPolynomialInSpan) {
    for (auto norm : {Norm::one, Norm::two, Norm::inf}) {
        auto truth = random_expansion(shared_set(3, 3, norm), 21);
        auto res = fct_approximate(expansion_function(truth), exact_config(truth->index_set_ptr(), 4));
        EXPECT_TRUE(res.cg.converged);
        EXPECT_LT(max_coeff_diff(*res.expansion, *truth), 1e-10) << to_string(norm);
        EXPECT_LT(mean_l2_coefficient_error(*res.expansion, *truth), 1e-11);
    }
}

TEST(Fct, SampleCountBound) {
    auto set = shared_set(6, 3, Norm::one);
    FctConfig cfg;
    cfg.set = set;
    cfg.build.seed = 3;
    auto res = fct_approximate(runge_function(6), cfg);
    EXPECT_EQ(res.L, 18u);
    EXPECT_LE(res.total_samples, res.L * set->size() * 4);
    EXPECT_GE(res.timings.total(), 0.0);
}

TEST(Fct, Deterministic) {
    auto set = shared_set(4, 4, Norm::two);
    FctConfig cfg;
    cfg.set = set;
    cfg.build.seed = 11;
    auto a = fct_approximate(oscillatory_function(4), cfg);
    auto b = fct_approximate(oscillatory_function(4), cfg);
    for (std::size_t j = 0; j < set->size(); ++j) EXPECT_EQ(a.expansion->coefficients()[j], b.expansion->coefficients()[j]);
}

TEST(Fct, DctPathsAgree) {
    auto set = shared_set(2, 40, Norm::one);
    FctConfig cfg;
    cfg.set = set;
    cfg.build.seed = 2;
    cfg.dct_path = DctPath::direct;
    auto a = fct_approximate(runge_function(2), cfg);
    cfg.dct_path = DctPath::fast;
    auto b = fct_approximate(runge_function(2), cfg);
    // same iteration count; roundoff differences get amplified by CG on a
    // deficient system, hence the loose bound
    EXPECT_EQ(a.cg.iterations, b.cg.iterations);
    EXPECT_LT(max_coeff_diff(*a.expansion, *b.expansion), 1e-8);
}

TEST(Fct, BudgetIsEnforced) {
    FctConfig cfg;
    cfg.set = shared_set(5, 5, Norm::one);
    cfg.budget_bytes = 1024;
    EXPECT_THROW(fct_approximate(runge_function(5), cfg), BudgetError);
    cfg.budget_bytes = kDefaultBudgetBytes;
    EXPECT_THROW(fct_approximate(runge_function(4), cfg), DimensionError);
}

TEST(Fct, CacheHitGivesSameResult) {
    const auto dir = std::filesystem::temp_directory_path() / "fct-pipeline-cache-test";
    std::filesystem::remove_all(dir);
    auto truth = random_expansion(shared_set(3, 4, Norm::one), 8);
    FctConfig cfg;
    cfg.set = truth->index_set_ptr();
    cfg.build.seed = 6;
    cfg.cache_dir = dir;
    std::vector<std::string> log;
    cfg.log = [&](const std::string& m) { log.push_back(m); };
    auto first = fct_approximate(expansion_function(truth), cfg);
    auto second = fct_approximate(expansion_function(truth), cfg);
    EXPECT_FALSE(first.cache_hit);
    EXPECT_TRUE(second.cache_hit);
    EXPECT_EQ(first.L, second.L);
    for (std::size_t j = 0; j < truth->size(); ++j)
        EXPECT_EQ(first.expansion->coefficients()[j], second.expansion->coefficients()[j]);

    // a damaged file is rebuilt, not trusted
    const auto path = cache_path(dir, cache_key(*cfg.set, cfg.build));
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x13');
    }
    auto third = fct_approximate(expansion_function(truth), cfg);
    EXPECT_FALSE(third.cache_hit);
    EXPECT_EQ(third.expansion->coefficients()[0], first.expansion->coefficients()[0]);
    bool rejected = false;
    for (const auto& m : log) rejected |= m.find("cache rejected") != std::string::npos;
    EXPECT_TRUE(rejected);
    std::filesystem::remove_all(dir);
}

TEST(Dct, RecoversTensorPolynomial) {
    auto truth = random_expansion(shared_set(4, 3, Norm::inf), 1);
    auto res = dct_interpolate(expansion_function(truth), 3);
    EXPECT_EQ(res.total_samples, 256u);
    EXPECT_LT(max_coeff_diff(*res.expansion, *truth), 1e-14);
}

TEST(Dct, AgreesWithFctOnPolynomials) {
    auto truth = random_expansion(shared_set(2, 5, Norm::inf), 3);
    const auto f = expansion_function(truth);
    auto dct = dct_interpolate(f, 5);
    auto fct = fct_approximate(f, exact_config(truth->index_set_ptr(), 9));
    EXPECT_LT(max_coeff_diff(*dct.expansion, *fct.expansion), 1e-10);
}

TEST(Dct, OneDimensionalRunge) {
    auto res = dct_interpolate(runge_function(1), 60);
    EXPECT_LT(linf_error(*res.expansion, runge_function(1), 2000, 1), 1e-6);
}

TEST(Dct, BudgetIsEnforced) {
    EXPECT_THROW(dct_interpolate(runge_function(25), 3), BudgetError);
    EXPECT_EQ(dct_memory_estimate(2, 3), 16u * (16 + 8));
}

TEST(Rlsi, RecoversPolynomial) {
    auto truth = random_expansion(shared_set(3, 3, Norm::one), 4);
    RlsiOptions o;
    o.cg_tol = 1e-13;
    o.seed = 2;
    auto res = rlsi_approximate(expansion_function(truth), truth->index_set_ptr(), o);
    EXPECT_TRUE(res.cg.converged);
    EXPECT_EQ(res.total_samples, static_cast<std::size_t>(std::ceil(1.2 * 20)));
    ASSERT_TRUE(res.kappa.has_value());
    EXPECT_LT(max_coeff_diff(*res.expansion, *truth), 1e-9);
}

TEST(Rlsi, RetriesExhausted) {
    auto set = shared_set(2, 3, Norm::one);
    RlsiOptions o;
    o.kappa_max = 1.0001;
    o.retries = 3;
    try {
        rlsi_approximate(runge_function(2), set, o);
        ADD_FAILURE() << "expected retry exhaustion";
    } catch (const RetryExhaustedError&) {
    }
    o = RlsiOptions{};
    o.C = 0.5;
    EXPECT_THROW(rlsi_approximate(runge_function(2), set, o), DomainError);
    o = RlsiOptions{};
    o.budget_bytes = 16;
    EXPECT_THROW(rlsi_approximate(runge_function(2), set, o), BudgetError);
}

TEST(Errors, CoefficientErrorUsesUnionSupport) {
    auto a_set = std::make_shared<const IndexSet>(IndexSet::from_flat(1, Norm::one, 3, {0, 1}));
    auto b_set = std::make_shared<const IndexSet>(IndexSet::from_flat(1, Norm::one, 3, {1, 3}));
    ChebExpansion approx(a_set, {1.0, 2.0});
    ChebExpansion truth(b_set, {2.5, -1.0});
    // (1-0)^2 + (2-2.5)^2 + (0+1)^2 = 2.25, sqrt = 1.5, over 2 true terms
    EXPECT_DOUBLE_EQ(mean_l2_coefficient_error(approx, truth), 0.75);
}

TEST(Errors, LinfOfExactExpansionIsRoundoff) {
    auto truth = random_expansion(shared_set(3, 4, Norm::one), 2);
    EXPECT_LT(linf_error(*truth, expansion_function(truth), 1000, 3), 1e-14);
    auto r = error_report(*truth, truth.get(), nullptr, 100, 0);
    ASSERT_TRUE(r.mean_l2_coeff_error && r.linf_sample_error);
    EXPECT_EQ(*r.mean_l2_coeff_error, 0.0);
    EXPECT_EQ(r.linf_points, 100u);
    EXPECT_THROW(error_report(*truth, nullptr, nullptr), DomainError);
}
