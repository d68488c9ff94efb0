// Acceptance checks, one per criterion. Prints one PASS/FAIL line per
// criterion and exits nonzero if any selected criterion fails.
//
//   acceptance                 all criteria
//   acceptance --criterion 4   just one

#include "fct/cli.hpp"
#include "fct/pipeline.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace fct;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    Clock() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::shared_ptr<const IndexSet> shared_set(std::size_t D, Exponent d, Norm s) {
    return std::make_shared<const IndexSet>(enumerate_index_set(D, d, s));
}

double max_coeff_diff(const ChebExpansion& a, const ChebExpansion& b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, std::abs(a.coefficients()[j] - b.coefficient(a.index_set()[j])));
    for (std::size_t j = 0; j < b.size(); ++j)
        if (!position_of(a.index_set(), b.index_set()[j])) worst = std::max(worst, std::abs(b.coefficients()[j]));
    return worst;
}

// Pointwise evaluation only, so sampling does not go through the folding code.
TargetFunction pointwise(std::shared_ptr<const ChebExpansion> e) {
    const std::size_t D = e->dim();
    return TargetFunction(D, [e](std::span<const double> x) { return evaluate_expansion_at(*e, x); });
}

// 1. closed-form aliasing entries against the direct quadrature sum
Outcome criterion_1() {
    Clock clock;
    double worst = 0.0;
    for (std::uint64_t P = 1; P <= 16; ++P)
        for (std::uint64_t n = 0; n < P; ++n)
            for (std::uint64_t m = 0; m <= 6 * P; ++m) {
                long double sum = 0.0L;
                for (std::uint64_t k = 0; k < P; ++k) {
                    const long double theta = (k + 0.5L) * std::numbers::pi_v<long double> / P;
                    sum += std::cos(n * theta) * std::cos(m * theta);
                }
                const double direct = static_cast<double>(sum / P);
                worst = std::max(worst, std::abs(direct - alias_entry_1d(P, n, m)));
            }
    const double t = clock.seconds();
    return {worst <= 1e-12 && t < 5.0, "max abs err " + sci(worst) + " (tol 1e-12), " + sci(t) + " s (limit 5 s)"};
}

// 2. fast DCT against the O(P^2) reference
Outcome criterion_2() {
    Clock clock;
    std::vector<std::size_t> sizes;
    for (std::size_t P = 1; P <= 64; ++P) sizes.push_back(P);
    for (std::size_t P : {127, 128, 255}) sizes.push_back(P);
    RngStream rng(2);
    double worst = 0.0;
    for (auto P : sizes)
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> f(P);
            for (auto& v : f) v = rng.uniform(-1.0, 1.0);
            const auto ref = dct_forward_1d_reference(f);
            const auto fast = dct_forward_1d(f, DctPath::fast);
            double scale = 0.0, diff = 0.0;
            for (std::size_t n = 0; n < P; ++n) {
                scale = std::max(scale, std::abs(ref[n]));
                diff = std::max(diff, std::abs(fast[n] - ref[n]));
            }
            worst = std::max(worst, diff / scale);
        }
    const double t = clock.seconds();
    return {worst <= 1e-13 && t < 30.0,
            "max rel err " + sci(worst) + " (tol 1e-13) over " + std::to_string(sizes.size() * 200) + " inputs, " +
                sci(t) + " s (limit 30 s)"};
}

// 3. A c equals the DCT of the sampled polynomial
Outcome criterion_3() {
    Clock clock;
    RngStream rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t D = 1 + rng.below(3);
        std::shared_ptr<const IndexSet> set;
        do {
            const auto d = static_cast<Exponent>(1 + rng.below(10));
            const Norm s = std::array{Norm::one, Norm::two, Norm::inf}[rng.below(3)];
            set = shared_set(D, d, s);
        } while (set->size() > 50);
        std::vector<std::uint32_t> counts(D);
        for (auto& p : counts) p = static_cast<std::uint32_t>(1 + rng.below(8));
        const GridSpec g(counts);
        auto e = random_expansion(set, 100 + trial);
        const auto b = dct_forward(sample_on_grid(pointwise(e), g));
        const auto block = assemble_block(g, *set);
        std::vector<double> ac(g.total_points(), 0.0);
        for (std::size_t k = 0; k < block.nnz(); ++k)
            ac[block.rows()[k]] += block.values()[k] * e->coefficients()[block.cols()[k]];
        for (std::size_t r = 0; r < ac.size(); ++r) worst = std::max(worst, std::abs(ac[r] - b.values[r]));
    }
    const double t = clock.seconds();
    return {worst <= 1e-12 && t < 10.0, "max |Ac - dct(sample)| " + sci(worst) + " (tol 1e-12), " + sci(t) +
                                            " s (limit 10 s)"};
}

// 4. exact-recovery round trip
Outcome criterion_4() {
    Clock clock;
    bool pass = true;
    std::ostringstream detail;
    detail << "L=3D tol=1e-3 passes/100:";
    const std::vector<std::pair<std::size_t, Exponent>> configs{{2, 3}, {5, 3}, {10, 3}, {15, 3},
                                                                {2, 6}, {5, 6}, {10, 6}, {15, 6}};
    for (auto [D, d] : configs) {
        auto set = shared_set(D, d, Norm::one);
        int ok = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            auto truth = random_expansion(set, seed);
            FctConfig cfg;
            cfg.set = set;
            cfg.build.seed = seed;
            cfg.build.kappa_policy = KappaPolicy::never;
            cfg.cg_tol = 1e-3;
            try {
                auto res = fct_approximate(expansion_function(truth), cfg);
                if (mean_l2_coefficient_error(*res.expansion, *truth) <= 1e-3) ++ok;
            } catch (const Error& e) {
                std::cerr << "  c4 D=" << D << " d=" << d << " seed=" << seed << ": " << e.what() << '\n';
            }
        }
        if (ok < 95) pass = false;
        detail << " D" << D << "d" << d << "=" << ok;
    }
    detail << "; adaptive kappa0=1e4 tol=1e-12 (err<=1e-8, 3 seeds):";
    for (auto [D, d] : configs) {
        auto set = shared_set(D, d, Norm::one);
        int ok = 0;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto truth = random_expansion(set, 1000 + seed);
            FctConfig cfg;
            cfg.set = set;
            cfg.build.mode = LMode::adaptive;
            cfg.build.kappa_max = 1e4;
            cfg.build.seed = seed;
            cfg.cg_tol = 1e-12;
            try {
                auto res = fct_approximate(expansion_function(truth), cfg);
                const double err = mean_l2_coefficient_error(*res.expansion, *truth);
                if (err <= 1e-8) ++ok;
                else std::cerr << "  c4 adaptive D=" << D << " d=" << d << " seed=" << seed << ": err " << sci(err) << '\n';
            } catch (const ConditioningError& e) {
                std::cerr << "  c4 adaptive D=" << D << " d=" << d << " seed=" << seed << ": " << e.what() << '\n';
            }
        }
        if (ok < 3) pass = false;
        detail << " D" << D << "d" << d << "=" << ok << "/3";
    }
    const double t = clock.seconds();
    if (t >= 300.0) pass = false;
    detail << "; " << sci(t) << " s (limit 300 s)";
    return {pass, detail.str()};
}

// 5. baselines agree with FCT / ground truth on small problems
Outcome criterion_5() {
    Clock clock;
    double fct_vs_dct = 0.0, rlsi_vs_truth = 0.0;
    std::size_t failures = 0;
    for (std::size_t D = 1; D <= 3; ++D)
        for (Exponent d = 1; d <= 8; ++d) {
            auto truth = random_expansion(shared_set(D, d, Norm::inf), 10 * D + d);
            const auto f = expansion_function(truth);
            FctConfig cfg;
            cfg.set = truth->index_set_ptr();
            cfg.build.mode = LMode::adaptive;
            cfg.build.L_max = 60 * D;
            cfg.build.seed = d;
            cfg.cg_tol = 1e-12;
            try {
                auto fct = fct_approximate(f, cfg);
                auto dct = dct_interpolate(f, d);
                fct_vs_dct = std::max(fct_vs_dct, max_coeff_diff(*fct.expansion, *dct.expansion));
            } catch (const Error& e) {
                ++failures;
                std::cerr << "  c5 fct D=" << D << " d=" << d << ": " << e.what() << '\n';
            }
            // 1.2 N distinct grid points need 1.2 N <= (d+1)^D, which rules
            // out S^inf; RLSI runs on the total-degree set in D >= 2
            if (D >= 2) {
                auto t1 = random_expansion(shared_set(D, d, Norm::one), 20 * D + d);
                RlsiOptions ro;
                ro.C = 1.2;
                ro.cg_tol = 1e-10;
                ro.seed = d;
                try {
                    auto rlsi = rlsi_approximate(expansion_function(t1), t1->index_set_ptr(), ro);
                    rlsi_vs_truth = std::max(rlsi_vs_truth, max_coeff_diff(*rlsi.expansion, *t1));
                } catch (const Error& e) {
                    ++failures;
                    std::cerr << "  c5 rlsi D=" << D << " d=" << d << ": " << e.what() << '\n';
                }
            }
        }
    const double t = clock.seconds();
    return {failures == 0 && fct_vs_dct <= 1e-8 && rlsi_vs_truth <= 1e-8 && t < 120.0,
            "fct vs dct " + sci(fct_vs_dct) + ", rlsi vs truth " + sci(rlsi_vs_truth) + " (tol 1e-8), " +
                std::to_string(failures) + " run failures, " + sci(t) + " s (limit 120 s)"};
}

// 6. f2 accuracy on the Euclidean sweep
Outcome criterion_6() {
    Clock clock;
    const std::size_t D = 5;
    const auto f = oscillatory_function(D);
    std::map<std::uint64_t, double> err;
    double wall50 = 0.0;
    std::size_t N50 = 0;
    for (std::uint64_t dE = 2; dE <= 50; ++dE) {
        auto set = std::make_shared<const IndexSet>(enumerate_euclidean_set(D, dE));
        FctConfig cfg;
        cfg.set = set;
        cfg.build.seed = 1;
        cfg.build.kappa_policy = KappaPolicy::never;
        cfg.cg_tol = 1e-12;
        Clock run;
        auto res = fct_approximate(f, cfg);
        if (dE == 50) {
            wall50 = run.seconds();
            N50 = set->size();
        }
        err[dE] = linf_error(*res.expansion, f, 5000, 0);
        std::cerr << "  c6 d_E=" << dE << " N=" << set->size() << " linf=" << sci(err[dE]) << '\n';
    }
    const double ratio = err[10] / err[50];
    const bool pass = err[50] <= 1e-10 && ratio >= 1e6 && wall50 <= 30.0;
    return {pass, "linf(d_E=50, N=" + std::to_string(N50) + ") " + sci(err[50]) + " (tol 1e-10), linf(10)/linf(50) " +
                      sci(ratio) + " (need 1e6), wall " + sci(wall50) + " s (limit 30 s); total " +
                      sci(clock.seconds()) + " s"};
}

// 7. sparse recovery in D=100 and the timing slope
Outcome criterion_7() {
    Clock clock;
    std::vector<double> logN, logT;
    double err_last = 0.0;
    for (std::uint64_t N : {1000ull, 10000ull, 100000ull}) {
        auto sparse = sparse_support_function(100, 5, N, 1);
        FctConfig cfg;
        cfg.set = sparse.truth->index_set_ptr();
        cfg.build.seed = 1;
        cfg.build.kappa_policy = KappaPolicy::never;
        auto res = fct_approximate(sparse.function, cfg);
        err_last = mean_l2_coefficient_error(*res.expansion, *sparse.truth);
        const double t = res.timings.transform + res.timings.solve;
        logN.push_back(std::log(static_cast<double>(N)));
        logT.push_back(std::log(t));
        std::cerr << "  c7 N=" << N << " transform+solve " << sci(t) << " s, cg iterations " << res.cg.iterations
                  << ", err " << sci(err_last) << '\n';
    }
    // least-squares slope
    const double mx = (logN[0] + logN[1] + logN[2]) / 3, my = (logT[0] + logT[1] + logT[2]) / 3;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (logN[i] - mx) * (logT[i] - my);
        sxx += (logN[i] - mx) * (logN[i] - mx);
    }
    const double slope = sxy / sxx;
    const double t = clock.seconds();
    return {err_last <= 1e-3 && slope <= 1.35 && t <= 600.0,
            "err(N=1e5) " + sci(err_last) + " (tol 1e-3), slope " + sci(slope) + " (limit 1.35), " + sci(t) +
                " s (limit 600 s)"};
}

// 8. L = 3D conditioning
Outcome criterion_8() {
    Clock clock;
    bool pass = true;
    std::ostringstream detail;
    detail << "full rank with kappa<=1e4 per 100 seeds:";
    for (std::size_t D : {2, 5, 10})
        for (Exponent d : {3u, 6u}) {
            auto set = shared_set(D, d, Norm::one);
            int ok = 0;
            std::vector<std::uint64_t> failed;
            for (std::uint64_t seed = 0; seed < 100; ++seed) {
                BuildOptions o;
                o.seed = seed;
                o.kappa_policy = KappaPolicy::never;
                auto sys = build_system(set, o);
                auto est = estimate_condition(sys);
                bool good = est.full_rank && est.kappa <= 1e4;
                if (good && set->size() <= 2000) {
                    // independent check with an SVD of the stacked matrix
                    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.total_rows()),
                                                              static_cast<Eigen::Index>(sys.n_cols()));
                    for (std::size_t l = 0; l < sys.num_blocks(); ++l) {
                        const auto& b = sys.block(l);
                        for (std::size_t e = 0; e < b.nnz(); ++e)
                            A(static_cast<Eigen::Index>(sys.row_offset(l) + b.rows()[e]), b.cols()[e]) = b.values()[e];
                    }
                    Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
                    const auto s = svd.singularValues();
                    good = s(s.size() - 1) > 0 && s(0) / s(s.size() - 1) <= 1e4;
                }
                if (good) ++ok;
                else failed.push_back(seed);
            }
            if (ok < 95) pass = false;
            detail << " D" << D << "d" << d << "=" << ok;
            if (!failed.empty()) {
                std::cerr << "  c8 D=" << D << " d=" << d << " failed seeds:";
                for (auto s : failed) std::cerr << ' ' << s;
                std::cerr << '\n';
            }
        }
    detail << "; " << sci(clock.seconds()) << " s";
    return {pass, detail.str()};
}

// 9. budget crossover on the scaling-d3 suite
Outcome criterion_9() {
    Clock clock;
    cli::RunOptions o;
    o.budget_bytes = kDefaultBudgetBytes;
    std::size_t first_oom = 0;
    bool dct_monotone = true, fct_all_ok = true;
    for (std::size_t D = 2; D <= 25; ++D) {
        auto truth = random_expansion(shared_set(D, 3, Norm::one), 0);
        const auto f = expansion_function(truth);
        auto dct = cli::run_method("dct", truth->index_set_ptr(), f, truth.get(), o);
        auto fct = cli::run_method("fct", truth->index_set_ptr(), f, truth.get(), o);
        if (dct.status == "oom_budget" && first_oom == 0) first_oom = D;
        if (first_oom != 0 && dct.status != "oom_budget") dct_monotone = false;
        if (fct.status != "ok") fct_all_ok = false;
        std::cerr << "  c9 D=" << D << " dct=" << dct.status << " fct=" << fct.status << '\n';
    }
    const bool pass = first_oom != 0 && first_oom <= 12 && dct_monotone && fct_all_ok;
    return {pass, "dct first oom_budget at D*=" + (first_oom ? std::to_string(first_oom) : std::string("none")) +
                      " (need <= 12), fct all ok up to D=25: " + (fct_all_ok ? "yes" : "no") + ", " +
                      sci(clock.seconds()) + " s"};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Outcome()>> criteria{criterion_1, criterion_2, criterion_3,
                                                         criterion_4, criterion_5, criterion_6,
                                                         criterion_7, criterion_8, criterion_9};
    bool all = true;
    for (int i = 1; i <= 9; ++i) {
        if (only && i != only) continue;
        Outcome r;
        try {
            r = criteria[static_cast<std::size_t>(i - 1)]();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        std::cout << "criterion " << i << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << std::endl;
        all = all && r.pass;
    }
    return all ? 0 : 1;
}
