#pragma once

// Command-line driver: recover, approximate, bench, precompute. Kept in a
// header so the commands can be exercised in-process by the tests.

#include "fct/cache.hpp"
#include "fct/chebgrid.hpp"
#include "fct/errors.hpp"
#include "fct/lgrid.hpp"
#include "fct/multiindex.hpp"
#include "fct/pipeline.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fct::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kBudget = 3, kConditioning = 4, kNoConvergence = 5, kIo = 6 };

struct RunRecord {
    std::string method;
    std::size_t D = 0;
    std::uint64_t d = 0;
    std::string norm;
    std::size_t N = 0;
    std::optional<std::size_t> L;
    std::uint64_t seed = 0;
    std::optional<double> build_ms, sample_ms, transform_ms, solve_ms;
    std::optional<std::size_t> cg_iterations;
    std::optional<double> kappa_estimate;
    std::optional<double> mean_l2_coeff_error;
    std::optional<double> linf_error;
    std::string status = "ok";
};

inline constexpr const char* kCsvHeader =
    "method,D,d,norm,N,L,seed,build_ms,sample_ms,transform_ms,solve_ms,cg_iterations,kappa_estimate,"
    "mean_l2_coeff_error,linf_error,status";

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_row(const RunRecord& r) {
    std::ostringstream os;
    auto opt_d = [&](const std::optional<double>& v) { os << ',' << (v ? format_double(*v) : ""); };
    auto opt_n = [&](const std::optional<std::size_t>& v) {
        os << ',';
        if (v) os << *v;
    };
    os << r.method << ',' << r.D << ',' << r.d << ',' << r.norm << ',' << r.N;
    opt_n(r.L);
    os << ',' << r.seed;
    opt_d(r.build_ms);
    opt_d(r.sample_ms);
    opt_d(r.transform_ms);
    opt_d(r.solve_ms);
    opt_n(r.cg_iterations);
    opt_d(r.kappa_estimate);
    opt_d(r.mean_l2_coeff_error);
    opt_d(r.linf_error);
    os << ',' << r.status;
    return os.str();
}

inline std::string to_csv(const std::vector<RunRecord>& rows) {
    std::string text = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) text += csv_row(r) + "\n";
    return text;
}

inline int exit_code_for(const std::string& status) {
    if (status == "ok") return kOk;
    if (status == "oom_budget") return kBudget;
    if (status == "cond_fail") return kConditioning;
    if (status == "no_converge") return kNoConvergence;
    return kUsage;
}

struct RunOptions {
    std::size_t L = 0;
    bool adaptive = false;
    double kappa = 1e4;
    double tol = 1e-3;
    std::size_t max_iter = 0;
    bool jacobi = false;
    std::uint64_t seed = 0;
    std::uint64_t budget_bytes = kDefaultBudgetBytes;
    std::optional<std::filesystem::path> cache_dir;
    std::size_t linf_points = 0;
    double C = 1.2;
    std::ostream* log = nullptr;
};

inline BuildOptions build_options(const RunOptions& o) {
    BuildOptions b;
    b.mode = o.adaptive ? LMode::adaptive : LMode::fixed;
    b.L = o.L;
    b.kappa_max = o.kappa;
    b.seed = o.seed;
    return b;
}

// Runs one method against a target; a ground truth, when known, gives the
// coefficient error. Failures become status rows.
inline RunRecord run_method(const std::string& method, std::shared_ptr<const IndexSet> set,
                            const TargetFunction& f, const ChebExpansion* truth, const RunOptions& o,
                            std::shared_ptr<const ChebExpansion>* result = nullptr) {
    RunRecord rec;
    rec.method = method;
    rec.D = set->dim();
    rec.d = set->degree();
    rec.norm = std::string(to_string(set->norm()));
    rec.N = set->size();
    rec.seed = o.seed;
    std::shared_ptr<const ChebExpansion> expansion;
    PhaseTimings t;
    bool converged = true;
    try {
        if (method == "fct") {
            FctConfig cfg;
            cfg.set = set;
            cfg.build = build_options(o);
            cfg.cg_tol = o.tol;
            cfg.max_iter = o.max_iter;
            cfg.jacobi = o.jacobi;
            cfg.cache_dir = o.cache_dir;
            cfg.budget_bytes = o.budget_bytes;
            if (o.log) cfg.log = [log = o.log](const std::string& m) { *log << m << '\n'; };
            auto res = fct_approximate(f, cfg);
            expansion = res.expansion;
            t = res.timings;
            rec.L = res.L;
            rec.cg_iterations = res.cg.iterations;
            rec.kappa_estimate = res.kappa;
            converged = res.cg.converged;
        } else if (method == "dct") {
            auto res = dct_interpolate(f, set->max_exponent(), o.budget_bytes);
            expansion = res.expansion;
            t = res.timings;
            rec.L = 1;
        } else if (method == "rlsi") {
            RlsiOptions ro;
            ro.C = o.C;
            ro.kappa_max = o.kappa;
            ro.cg_tol = o.tol;
            ro.max_iter = o.max_iter;
            ro.seed = o.seed;
            ro.budget_bytes = o.budget_bytes;
            auto res = rlsi_approximate(f, set, ro);
            expansion = res.expansion;
            t = res.timings;
            rec.cg_iterations = res.cg.iterations;
            rec.kappa_estimate = res.kappa;
            converged = res.cg.converged;
        } else {
            throw DomainError("unknown method '" + method + "'");
        }
    } catch (const BudgetError& e) {
        rec.status = "oom_budget";
        if (o.log) *o.log << method << ": " << e.what() << '\n';
        return rec;
    } catch (const ConditioningError& e) {
        rec.status = "cond_fail";
        rec.L = e.blocks();
        rec.kappa_estimate = e.kappa();
        if (o.log) *o.log << method << ": " << e.what() << '\n';
        return rec;
    } catch (const RetryExhaustedError& e) {
        rec.status = "cond_fail";
        if (o.log) *o.log << method << ": " << e.what() << '\n';
        return rec;
    } catch (const CgBreakdownError& e) {
        rec.status = "no_converge";
        if (o.log) *o.log << method << ": " << e.what() << '\n';
        return rec;
    }
    rec.build_ms = t.build * 1e3;
    rec.sample_ms = t.sample * 1e3;
    rec.transform_ms = t.transform * 1e3;
    rec.solve_ms = t.solve * 1e3;
    if (!converged) {
        rec.status = "no_converge";
        return rec;
    }
    if (result) *result = expansion;
    if (truth) rec.mean_l2_coeff_error = mean_l2_coefficient_error(*expansion, *truth);
    if (o.linf_points > 0) rec.linf_error = linf_error(*expansion, f, o.linf_points, o.seed);
    return rec;
}

inline void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    detail::write_atomically(path, text.data(), text.size());
}

// a:b:step, inclusive
inline std::vector<std::uint64_t> parse_sweep(const std::string& text) {
    std::vector<std::uint64_t> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        std::uint64_t v = 0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size())
            throw DomainError("bad degree sweep '" + text + "'");
        parts.push_back(v);
    }
    if (parts.size() == 1) parts = {parts[0], parts[0], 1};
    if (parts.size() != 3 || parts[2] == 0 || parts[1] < parts[0])
        throw DomainError("degree sweep must look like a:b:step with a <= b and step >= 1");
    std::vector<std::uint64_t> out;
    for (std::uint64_t v = parts[0]; v <= parts[1]; v += parts[2]) out.push_back(v);
    return out;
}

inline std::optional<std::filesystem::path> resolve_cache_dir(const std::string& flag, bool no_cache) {
    if (no_cache) return std::nullopt;
    if (const char* env = std::getenv("FCT_CACHE_DIR"); env && *env) return std::filesystem::path(env);
    if (!flag.empty()) return std::filesystem::path(flag);
    return std::nullopt;
}

inline void add_run_flags(CLI::App* cmd, RunOptions& o, std::uint64_t& budget_mb, std::size_t& threads) {
    cmd->add_option("-L", o.L, "Number of grids (default 3 D); minimum L in adaptive mode");
    cmd->add_flag("--adaptive", o.adaptive, "Add grids until kappa <= --kappa");
    cmd->add_option("--kappa", o.kappa, "Condition bound kappa_0")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", o.tol, "CG relative residual tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", o.max_iter, "CG iteration cap (default 10 N)");
    cmd->add_flag("--jacobi", o.jacobi, "Jacobi-preconditioned CG");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--budget-mb", budget_mb, "Memory budget in MiB");
    cmd->add_option("--C", o.C, "RLSI oversampling factor");
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Chebyshev coefficient recovery on randomized L-grids", "fct"};
    app.require_subcommand(1);

    RunOptions o;
    std::uint64_t budget_mb = 4096;
    std::size_t threads = 1;
    std::string out_path, cache_flag;
    bool no_cache = false;

    // recover
    auto* recover = app.add_subcommand("recover", "Recover the coefficients of a random test polynomial");
    std::string method = "fct", norm_text = "1", indices_file, expansion_file, coeffs_out;
    std::size_t dim = 0;
    std::uint64_t degree = 0, num_coeffs = 0;
    recover->add_option("--method", method, "fct, dct or rlsi")
        ->check(CLI::IsMember({"fct", "dct", "rlsi"}));
    recover->add_option("--dim", dim, "Dimension D");
    recover->add_option("--degree", degree, "Degree d");
    recover->add_option("--norm", norm_text, "Index-set norm: 1, 2 or inf")
        ->check(CLI::IsMember({"1", "2", "inf"}));
    recover->add_option("--num-coeffs", num_coeffs, "Sparse support: N indices drawn from S^inf_{d,D}");
    recover->add_option("--indices-file", indices_file, "Index set file; random coefficients over it");
    recover->add_option("--expansion-file", expansion_file, "Ground-truth expansion file");
    recover->add_option("--out", out_path, "CSV output (default stdout)");
    recover->add_option("--coeffs-out", coeffs_out, "Write the recovered expansion");
    recover->add_option("--linf-points", o.linf_points, "Random points for the max error (0 skips)");
    recover->add_option("--cache-dir", cache_flag, "L-grid cache directory");
    recover->add_flag("--no-cache", no_cache, "Disable the L-grid cache");
    add_run_flags(recover, o, budget_mb, threads);

    // approximate
    auto* approximate = app.add_subcommand("approximate", "Euclidean-degree sweep on f1 or f2");
    std::string function = "oscillatory", sweep_text, measure = "radius", slice_out;
    std::size_t slice_points = 101;
    std::size_t approx_linf = 5000;
    approximate->add_option("--function", function, "runge or oscillatory")
        ->check(CLI::IsMember({"runge", "oscillatory"}));
    approximate->add_option("--dim", dim, "Dimension D")->required();
    approximate->add_option("--euclidean-degree", sweep_text, "Degree sweep a:b:step")->required();
    approximate->add_option("--euclidean-measure", measure,
                            "radius: sum n_i^2 <= d^2; squared: sum n_i^2 <= d")
        ->check(CLI::IsMember({"radius", "squared"}));
    approximate->add_option("--linf-points", approx_linf, "Random points for the max error");
    approximate->add_option("--out", out_path, "CSV output (default stdout)");
    approximate->add_option("--slice-out", slice_out,
                            "CSV of f and p on the (x1, x2) plane through the origin at the last degree");
    approximate->add_option("--slice-points", slice_points, "Slice resolution per axis")
        ->check(CLI::PositiveNumber);
    approximate->add_option("--cache-dir", cache_flag, "L-grid cache directory");
    approximate->add_flag("--no-cache", no_cache, "Disable the L-grid cache");
    add_run_flags(approximate, o, budget_mb, threads);

    // bench
    auto* bench = app.add_subcommand("bench", "Scaling and sparse-recovery sweeps");
    std::string suite, methods_text;
    std::size_t seeds = 1, d_min = 2, d_max = 25;
    bool huge = false;
    bench->add_option("--suite", suite, "scaling-d3, scaling-d6 or sparse-d100")
        ->required()
        ->check(CLI::IsMember({"scaling-d3", "scaling-d6", "sparse-d100"}));
    bench->add_option("--methods", methods_text, "Comma-separated methods");
    bench->add_option("--seeds", seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
    bench->add_option("--dim-min", d_min, "Smallest D for scaling suites");
    bench->add_option("--dim-max", d_max, "Largest D for scaling suites");
    bench->add_flag("--huge", huge, "Include N = 1e6 and 1e7 in sparse-d100");
    bench->add_option("--out", out_path, "CSV output (default stdout)");
    bench->add_option("--linf-points", o.linf_points, "Random points for the max error (0 skips)");
    bench->add_option("--cache-dir", cache_flag, "L-grid cache directory");
    bench->add_flag("--no-cache", no_cache, "Disable the L-grid cache");
    add_run_flags(bench, o, budget_mb, threads);

    // precompute
    auto* precompute = app.add_subcommand("precompute", "Build and cache an L-grid system");
    precompute->add_option("--dim", dim, "Dimension D")->required();
    precompute->add_option("--degree", degree, "Degree d")->required();
    precompute->add_option("--norm", norm_text, "Index-set norm: 1, 2 or inf")
        ->check(CLI::IsMember({"1", "2", "inf"}));
    precompute->add_option("--cache-dir", cache_flag, "L-grid cache directory (default fct-cache)");
    add_run_flags(precompute, o, budget_mb, threads);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    o.budget_bytes = budget_mb << 20;
    o.log = &err;
    if (threads != 1) err << "note: only single-threaded execution is implemented; --threads ignored\n";

    try {
        if (recover->parsed()) {
            o.cache_dir = resolve_cache_dir(cache_flag, no_cache);
            std::shared_ptr<const ChebExpansion> truth;
            const int sources = (num_coeffs > 0) + !indices_file.empty() + !expansion_file.empty();
            if (sources > 1) {
                err << "choose at most one of --num-coeffs, --indices-file, --expansion-file\n"
                    << recover->help();
                return kUsage;
            }
            if (!expansion_file.empty()) {
                std::ifstream in(expansion_file);
                if (!in) throw IoError("cannot open " + expansion_file);
                truth = read_expansion(in);
            } else if (!indices_file.empty()) {
                std::ifstream in(indices_file);
                if (!in) throw IoError("cannot open " + indices_file);
                truth = random_expansion(std::make_shared<const IndexSet>(read_index_set(in)), o.seed);
            } else {
                if (dim == 0) {
                    err << "--dim is required\n" << recover->help();
                    return kUsage;
                }
                if (num_coeffs > 0) {
                    truth = sparse_support_function(dim, static_cast<Exponent>(degree), num_coeffs, o.seed).truth;
                } else {
                    truth = random_expansion(std::make_shared<const IndexSet>(enumerate_index_set(
                                                 dim, static_cast<Exponent>(degree), parse_norm(norm_text))),
                                             o.seed);
                }
            }
            const auto f = expansion_function(truth, "test-polynomial");
            std::shared_ptr<const ChebExpansion> result;
            auto rec = run_method(method, truth->index_set_ptr(), f, truth.get(), o, &result);
            write_output(out_path, to_csv({rec}), out);
            if (!coeffs_out.empty() && result) {
                std::ostringstream os;
                write_expansion(os, *result);
                const auto text = os.str();
                detail::write_atomically(coeffs_out, text.data(), text.size());
            }
            return exit_code_for(rec.status);
        }

        if (approximate->parsed()) {
            o.cache_dir = resolve_cache_dir(cache_flag, no_cache);
            o.linf_points = approx_linf;
            const auto f = function == "runge" ? runge_function(dim) : oscillatory_function(dim);
            std::vector<RunRecord> rows;
            std::shared_ptr<const ChebExpansion> last;
            int code = kOk;
            for (auto dE : parse_sweep(sweep_text)) {
                auto set = std::make_shared<const IndexSet>(
                    measure == "squared" ? enumerate_euclidean_set(dim, dE)
                                         : enumerate_index_set(dim, static_cast<Exponent>(dE), Norm::two));
                std::shared_ptr<const ChebExpansion> result;
                auto rec = run_method("fct", set, f, nullptr, o, &result);
                rec.d = dE;
                err << "d_E=" << dE << " N=" << rec.N << " status=" << rec.status << '\n';
                if (rec.status != "ok" && code == kOk) code = exit_code_for(rec.status);
                if (result) last = result;
                rows.push_back(std::move(rec));
            }
            write_output(out_path, to_csv(rows), out);
            if (!slice_out.empty() && last) {
                std::ostringstream os;
                os << "x1,x2,f,p\n";
                std::vector<double> x(dim, 0.0);
                for (std::size_t a = 0; a < slice_points; ++a)
                    for (std::size_t b = 0; b < (dim > 1 ? slice_points : 1); ++b) {
                        const auto step = [&](std::size_t k) {
                            return slice_points == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(k) / (slice_points - 1);
                        };
                        x[0] = step(a);
                        if (dim > 1) x[1] = step(b);
                        os << format_double(x[0]) << ',' << (dim > 1 ? format_double(x[1]) : "") << ','
                           << format_double(f(x)) << ',' << format_double(evaluate_expansion_at(*last, x)) << '\n';
                    }
                const auto text = os.str();
                detail::write_atomically(slice_out, text.data(), text.size());
            }
            return code;
        }

        if (bench->parsed()) {
            o.cache_dir = resolve_cache_dir(cache_flag, no_cache);
            std::vector<std::string> methods;
            if (methods_text.empty()) {
                methods = suite == "sparse-d100" ? std::vector<std::string>{"fct", "rlsi"}
                                                 : std::vector<std::string>{"fct", "dct", "rlsi"};
            } else {
                std::stringstream ss(methods_text);
                std::string m;
                while (std::getline(ss, m, ','))
                    if (!m.empty()) methods.push_back(m);
            }
            for (const auto& m : methods)
                if (m != "fct" && m != "dct" && m != "rlsi") {
                    err << "unknown method '" << m << "'\n";
                    return kUsage;
                }
            std::vector<RunRecord> rows;
            const std::uint64_t base_seed = o.seed;
            auto record = [&](RunRecord rec) {
                err << suite << ' ' << rec.method << " D=" << rec.D << " N=" << rec.N << " seed=" << rec.seed
                    << " status=" << rec.status << '\n';
                rows.push_back(std::move(rec));
            };
            for (std::size_t s = 0; s < seeds; ++s) {
                o.seed = base_seed + s;
                if (suite == "sparse-d100") {
                    std::vector<std::uint64_t> sizes{1000, 10000, 100000};
                    if (huge) {
                        sizes.push_back(1000000);
                        sizes.push_back(10000000);
                    }
                    for (auto N : sizes) {
                        auto sparse = sparse_support_function(100, 5, N, o.seed);
                        for (const auto& m : methods)
                            record(run_method(m, sparse.truth->index_set_ptr(), sparse.function,
                                              sparse.truth.get(), o));
                    }
                } else {
                    const Exponent d = suite == "scaling-d3" ? 3 : 6;
                    for (std::size_t D = d_min; D <= d_max; ++D) {
                        auto truth = random_expansion(
                            std::make_shared<const IndexSet>(enumerate_index_set(D, d, Norm::one)), o.seed);
                        const auto f = expansion_function(truth, "test-polynomial");
                        for (const auto& m : methods)
                            record(run_method(m, truth->index_set_ptr(), f, truth.get(), o));
                    }
                }
            }
            write_output(out_path, to_csv(rows), out);
            return kOk;
        }

        if (precompute->parsed()) {
            auto dir = resolve_cache_dir(cache_flag.empty() ? "fct-cache" : cache_flag, false);
            auto set = std::make_shared<const IndexSet>(
                enumerate_index_set(dim, static_cast<Exponent>(degree), parse_norm(norm_text)));
            auto opts = build_options(o);
            opts.kappa_policy = KappaPolicy::always;
            const auto path = cache_path(*dir, cache_key(*set, opts));
            if (std::filesystem::exists(path)) {
                try {
                    auto sys = cache_load(path, set);
                    out << "cache hit: " << path.string() << " (no work)\n";
                    return kOk;
                } catch (const CacheError& e) {
                    err << "cache rejected, rebuilding: " << e.what() << '\n';
                }
            }
            auto sys = build_system(set, opts);
            cache_store(path, sys);
            out << "stored " << path.string() << "\n"
                << "N=" << sys.n_cols() << " L=" << sys.num_blocks() << " rows=" << sys.total_rows()
                << " nnz=" << sys.nnz() << " empty_columns=" << sys.empty_columns()
                << " kappa=" << format_double(sys.kappa().value_or(std::nan(""))) << '\n';
            return kOk;
        }
    } catch (const ConditioningError& e) {
        err << "error: " << e.what() << '\n';
        return kConditioning;
    } catch (const BudgetError& e) {
        err << "error: " << e.what() << '\n';
        return kBudget;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const CacheError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"fct"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace fct::cli
