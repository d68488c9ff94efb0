#pragma once

// First-kind Chebyshev grids, sampling, Chebyshev expansions and the three
// benchmark function families.
//
// A grid parameter P always means P points x_k = cos((k + 1/2) pi / P),
// k = 0..P-1. Tensor samples are stored row-major with the last dimension
// fastest.

#include "fct/errors.hpp"
#include "fct/multiindex.hpp"
#include "fct/rng.hpp"
#include "fct/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fct {

// Evaluated as sin(pi (P - 1 - 2k) / (2P)), which equals cos((k+1/2) pi / P)
// but is exactly odd about the midpoint (x_k = -x_{P-1-k}, middle node 0).
inline std::vector<double> chebyshev_points(std::size_t P) {
    if (P == 0) throw DomainError("a Chebyshev grid needs at least one point");
    std::vector<double> x(P);
    const double scale = std::numbers::pi / (2.0 * static_cast<double>(P));
    for (std::size_t k = 0; k < P; ++k) {
        const auto num = static_cast<std::int64_t>(P) - 1 - 2 * static_cast<std::int64_t>(k);
        x[k] = std::sin(scale * static_cast<double>(num));
    }
    return x;
}

// cos(j pi / (2P)) for integer j, reduced exactly modulo 4P first.
inline double cos_quarter_turns(std::int64_t j, std::size_t P) {
    const auto period = static_cast<std::int64_t>(4 * P);
    j %= period;
    if (j < 0) j += period;
    return std::cos(std::numbers::pi * static_cast<double>(j) / (2.0 * static_cast<double>(P)));
}

// cos(n theta_k) with theta_k = (k + 1/2) pi / P, i.e. T_n at node k.
inline double cos_node(std::uint64_t n, std::size_t k, std::size_t P) {
    const std::uint64_t period = 4 * static_cast<std::uint64_t>(P);
    const auto j = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(n % period) * ((2 * k + 1) % period)) % period);
    return cos_quarter_turns(static_cast<std::int64_t>(j), P);
}

class GridSpec {
public:
    explicit GridSpec(std::vector<std::uint32_t> points_per_dim) : counts_(std::move(points_per_dim)) {
        if (counts_.empty()) throw DimensionError("grid must have dimension >= 1");
        unsigned __int128 total = 1;
        for (auto p : counts_) {
            if (p == 0) throw DomainError("every grid dimension needs at least one point");
            total *= p;
            if (total > static_cast<unsigned __int128>(std::numeric_limits<std::size_t>::max() / 16))
                throw OverflowError("grid point count is not representable");
        }
        total_ = static_cast<std::size_t>(total);
    }
    GridSpec(std::initializer_list<std::uint32_t> counts)
        : GridSpec(std::vector<std::uint32_t>(counts)) {}

    [[nodiscard]] std::size_t dim() const noexcept { return counts_.size(); }
    [[nodiscard]] std::span<const std::uint32_t> counts() const noexcept { return counts_; }
    [[nodiscard]] std::uint32_t operator[](std::size_t i) const { return counts_[i]; }
    [[nodiscard]] std::size_t total_points() const noexcept { return total_; }

    [[nodiscard]] std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(counts_.size(), 1);
        for (std::size_t i = counts_.size() - 1; i-- > 0;) s[i] = s[i + 1] * counts_[i + 1];
        return s;
    }

    friend bool operator==(const GridSpec& a, const GridSpec& b) { return a.counts_ == b.counts_; }

private:
    std::vector<std::uint32_t> counts_;
    std::size_t total_ = 1;
};

struct SampleVector {
    GridSpec grid;
    std::vector<double> values;

    SampleVector(GridSpec g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid.total_points())
            throw DimensionError("sample vector length does not match the grid");
    }
};

class ChebExpansion {
public:
    ChebExpansion(std::shared_ptr<const IndexSet> set, std::vector<double> coefficients)
        : set_(std::move(set)), coefficients_(std::move(coefficients)) {
        if (!set_) throw DomainError("expansion needs an index set");
        if (coefficients_.size() != set_->size())
            throw DimensionError("coefficient count " + std::to_string(coefficients_.size()) +
                                 " does not match index set size " + std::to_string(set_->size()));
        for (double c : coefficients_)
            if (!std::isfinite(c)) throw NonFiniteError("expansion coefficient is not finite");
    }

    [[nodiscard]] const IndexSet& index_set() const noexcept { return *set_; }
    [[nodiscard]] const std::shared_ptr<const IndexSet>& index_set_ptr() const noexcept { return set_; }
    [[nodiscard]] std::span<const double> coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] std::size_t size() const noexcept { return coefficients_.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return set_->dim(); }

    // Zero when the index is not in the support.
    [[nodiscard]] double coefficient(std::span<const Exponent> n) const {
        auto pos = position_of(*set_, n);
        return pos ? coefficients_[*pos] : 0.0;
    }

private:
    std::shared_ptr<const IndexSet> set_;
    std::vector<double> coefficients_;
};

class TargetFunction {
public:
    using Evaluator = std::function<double(std::span<const double>)>;
    // Optional fast path producing row-major samples on a whole tensor grid.
    using GridSampler = std::function<std::vector<double>(const GridSpec&)>;

    TargetFunction(std::size_t dim, Evaluator evaluator, GridSampler grid_sampler = {},
                   std::string name = {})
        : dim_(dim), evaluator_(std::move(evaluator)), grid_sampler_(std::move(grid_sampler)),
          name_(std::move(name)) {
        if (dim_ == 0) throw DimensionError("target function dimension must be >= 1");
        if (!evaluator_) throw DomainError("target function needs an evaluator");
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] bool has_grid_sampler() const noexcept { return static_cast<bool>(grid_sampler_); }
    [[nodiscard]] const GridSampler& grid_sampler() const noexcept { return grid_sampler_; }

    double operator()(std::span<const double> x) const { return evaluator_(x); }

private:
    std::size_t dim_;
    Evaluator evaluator_;
    GridSampler grid_sampler_;
    std::string name_;
};

namespace detail {

inline std::string format_point(std::span<const double> x) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ')';
    return os.str();
}

inline std::vector<double> grid_point(const GridSpec& g, const std::vector<std::vector<double>>& nodes,
                                      std::size_t flat_index) {
    std::vector<double> x(g.dim());
    for (std::size_t i = g.dim(); i-- > 0;) {
        x[i] = nodes[i][flat_index % g[i]];
        flat_index /= g[i];
    }
    return x;
}

} // namespace detail

inline SampleVector sample_on_grid(const TargetFunction& f, const GridSpec& g) {
    if (f.dim() != g.dim())
        throw DimensionError("function dimension " + std::to_string(f.dim()) +
                             " does not match grid dimension " + std::to_string(g.dim()));
    std::vector<std::vector<double>> nodes;
    nodes.reserve(g.dim());
    for (auto p : g.counts()) nodes.push_back(chebyshev_points(p));

    std::vector<double> values;
    if (f.has_grid_sampler()) {
        values = f.grid_sampler()(g);
        if (values.size() != g.total_points())
            throw DimensionError("grid sampler returned the wrong number of values");
    } else {
        values.resize(g.total_points());
        std::vector<std::uint32_t> k(g.dim(), 0);
        std::vector<double> x(g.dim());
        for (std::size_t i = 0; i < g.dim(); ++i) x[i] = nodes[i][0];
        for (std::size_t idx = 0; idx < values.size(); ++idx) {
            values[idx] = f(x);
            // odometer increment, last dimension fastest
            for (std::size_t i = g.dim(); i-- > 0;) {
                if (++k[i] < g[i]) {
                    x[i] = nodes[i][k[i]];
                    break;
                }
                k[i] = 0;
                x[i] = nodes[i][0];
            }
        }
    }
    for (std::size_t idx = 0; idx < values.size(); ++idx)
        if (!std::isfinite(values[idx]))
            throw NonFiniteError("target function is not finite at grid point " +
                                 detail::format_point(detail::grid_point(g, nodes, idx)));
    return SampleVector(g, std::move(values));
}

namespace detail {

// Per-dimension tables T_0..T_{dmax_i}(x_i) by the three-term recurrence.
class ChebTables {
public:
    explicit ChebTables(const IndexSet& set) : offsets_(set.dim() + 1, 0) {
        for (std::size_t i = 0; i < set.dim(); ++i)
            offsets_[i + 1] = offsets_[i] + set.max_exponent(i) + 1;
        values_.resize(offsets_.back());
    }

    void fill(std::span<const double> x) {
        for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) {
            double* t = values_.data() + offsets_[i];
            const std::size_t n = offsets_[i + 1] - offsets_[i];
            t[0] = 1.0;
            if (n > 1) t[1] = x[i];
            for (std::size_t k = 2; k < n; ++k) t[k] = 2.0 * x[i] * t[k - 1] - t[k - 2];
        }
    }

    [[nodiscard]] double operator()(std::size_t dim, Exponent n) const {
        return values_[offsets_[dim] + n];
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
};

inline void check_domain(std::span<const double> x) {
    for (double v : x)
        if (!(v >= -1.0 && v <= 1.0))
            throw DomainError("point " + format_point(x) + " lies outside [-1,1]^D");
}

inline double evaluate_with_tables(const ChebExpansion& e, const ChebTables& t) {
    const IndexSet& set = e.index_set();
    const auto coeffs = e.coefficients();
    const std::size_t D = set.dim();
    double sum = 0.0;
    for (std::size_t j = 0; j < set.size(); ++j) {
        const auto n = set[j];
        double term = coeffs[j];
        for (std::size_t i = 0; i < D && term != 0.0; ++i)
            if (n[i] != 0) term *= t(i, n[i]);
        sum += term;
    }
    return sum;
}

} // namespace detail

// p(x) = sum_n c_n prod_i T_{n_i}(x_i) at each point; points are stored
// flat, D coordinates per point.
inline std::vector<double> evaluate_expansion(const ChebExpansion& e, std::span<const double> points) {
    const std::size_t D = e.dim();
    if (points.size() % D != 0)
        throw DimensionError("point buffer is not a multiple of the expansion dimension");
    detail::ChebTables tables(e.index_set());
    std::vector<double> out(points.size() / D);
    for (std::size_t p = 0; p < out.size(); ++p) {
        auto x = points.subspan(p * D, D);
        detail::check_domain(x);
        tables.fill(x);
        out[p] = detail::evaluate_with_tables(e, tables);
    }
    return out;
}

inline double evaluate_expansion_at(const ChebExpansion& e, std::span<const double> x) {
    if (x.size() != e.dim()) throw DimensionError("point dimension does not match the expansion");
    return evaluate_expansion(e, x).front();
}

// Values of an expansion on a whole tensor grid. Each T_m is folded onto the
// grid first (cos(m theta_k) = +-cos(n theta_k) with 0 <= n < P, or vanishes
// when m = P mod 2P), then the folded coefficients are synthesized with one
// cosine sweep per dimension. Cost O(|N| D + prod(P) sum(P)).
inline std::vector<double> sample_expansion_on_grid(const ChebExpansion& e, const GridSpec& g) {
    const IndexSet& set = e.index_set();
    if (set.dim() != g.dim()) throw DimensionError("expansion and grid dimensions differ");
    const std::size_t D = g.dim();
    const auto strides = g.strides();
    std::vector<double> tensor(g.total_points(), 0.0);
    const auto coeffs = e.coefficients();
    for (std::size_t j = 0; j < set.size(); ++j) {
        const auto m = set[j];
        std::size_t offset = 0;
        bool negative = false;
        bool vanishes = false;
        for (std::size_t i = 0; i < D; ++i) {
            const std::uint64_t P = g[i];
            const std::uint64_t r = m[i] % (2 * P);
            if (r == P) {
                vanishes = true;
                break;
            }
            const std::uint64_t q = m[i] / (2 * P);
            negative ^= (q & 1U) != 0;
            std::uint64_t n = r;
            if (r > P) {
                n = 2 * P - r;
                negative = !negative;
            }
            offset += static_cast<std::size_t>(n) * strides[i];
        }
        if (!vanishes) tensor[offset] += negative ? -coeffs[j] : coeffs[j];
    }
    for (std::size_t axis = 0; axis < D; ++axis) {
        const std::size_t P = g[axis];
        if (P == 1) continue;
        std::vector<double> synth(P * P);
        for (std::size_t k = 0; k < P; ++k)
            for (std::size_t n = 0; n < P; ++n) synth[k * P + n] = cos_node(n, k, P);
        detail::apply_along_axis(tensor, g.counts(), axis, synth);
    }
    return tensor;
}

inline TargetFunction expansion_function(std::shared_ptr<const ChebExpansion> e, std::string name = "expansion") {
    const std::size_t D = e->dim();
    auto eval = [e](std::span<const double> x) { return evaluate_expansion_at(*e, x); };
    auto grid = [e](const GridSpec& g) { return sample_expansion_on_grid(*e, g); };
    return TargetFunction(D, std::move(eval), std::move(grid), std::move(name));
}

inline double squared_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

// f1(x) = 1 / (1 + 10 ||x||^2)
inline TargetFunction runge_function(std::size_t dim) {
    return TargetFunction(
        dim, [](std::span<const double> x) { return 1.0 / (1.0 + 10.0 * squared_norm(x)); }, {},
        "runge");
}

// f2(x) = sin(3 cos(3 exp(||x||^2))) + exp(sin(3 x.1))
inline TargetFunction oscillatory_function(std::size_t dim) {
    return TargetFunction(
        dim,
        [](std::span<const double> x) {
            double sum = 0.0;
            for (double v : x) sum += v;
            return std::sin(3.0 * std::cos(3.0 * std::exp(squared_norm(x)))) +
                   std::exp(std::sin(3.0 * sum));
        },
        {}, "oscillatory");
}

struct SparseSupportFunction {
    TargetFunction function;
    std::shared_ptr<const ChebExpansion> truth;
};

namespace detail {

// Sorts (index, coefficient) pairs into canonical order and builds the expansion.
inline std::shared_ptr<const ChebExpansion> make_expansion(std::size_t dim, Norm norm, Exponent degree,
                                                          std::vector<Exponent> flat,
                                                          std::vector<double> coeffs) {
    const std::size_t count = coeffs.size();
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    auto row = [&](std::size_t i) { return std::span<const Exponent>(flat.data() + i * dim, dim); };
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return canonical_less(row(a), row(b)); });
    std::vector<Exponent> sorted_flat;
    sorted_flat.reserve(flat.size());
    std::vector<double> sorted_coeffs;
    sorted_coeffs.reserve(count);
    for (auto i : order) {
        auto r = row(i);
        sorted_flat.insert(sorted_flat.end(), r.begin(), r.end());
        sorted_coeffs.push_back(coeffs[i]);
    }
    auto set = std::make_shared<const IndexSet>(
        IndexSet::from_flat(dim, norm, degree, std::move(sorted_flat)));
    return std::make_shared<const ChebExpansion>(std::move(set), std::move(sorted_coeffs));
}

} // namespace detail

// f3: N distinct multi-indices drawn uniformly from S^inf_{d,D}, coefficients
// uniform in [-1, 1].
inline SparseSupportFunction sparse_support_function(std::size_t dim, Exponent degree, std::uint64_t count,
                                                     std::uint64_t seed) {
    if (dim == 0) throw DimensionError("dimension must be >= 1");
    if (count == 0) throw InfeasibleError("sparse support needs at least one coefficient");
    RngStream rng(seed);
    std::vector<Exponent> flat;
    try {
        flat = sample_distinct_tuples(dim, degree + 1, count, rng);
    } catch (const InfeasibleError& err) {
        throw InfeasibleError(std::string("sparse support: ") + err.what());
    }
    std::vector<double> coeffs(count);
    for (auto& c : coeffs) c = rng.uniform(-1.0, 1.0);
    auto truth = detail::make_expansion(dim, Norm::inf, degree, std::move(flat), std::move(coeffs));
    return {expansion_function(truth, "sparse-support"), truth};
}

// Random coefficients uniform in [-1, 1] over a given index set.
inline std::shared_ptr<const ChebExpansion> random_expansion(std::shared_ptr<const IndexSet> set,
                                                             std::uint64_t seed) {
    RngStream rng(seed);
    std::vector<double> coeffs(set->size());
    for (auto& c : coeffs) c = rng.uniform(-1.0, 1.0);
    return std::make_shared<const ChebExpansion>(std::move(set), std::move(coeffs));
}

// Index-set text format followed by one coefficient per line, written in the
// shortest form that round-trips exactly.
inline void write_expansion(std::ostream& os, const ChebExpansion& e) {
    write_index_set(os, e.index_set());
    char buf[64];
    for (double c : e.coefficients()) {
        auto res = std::to_chars(buf, buf + sizeof buf, c);
        os.write(buf, res.ptr - buf);
        os << '\n';
    }
}

inline std::shared_ptr<const ChebExpansion> read_expansion(std::istream& is) {
    // Read the index block verbatim so coefficients stay paired with their
    // indices even if the file is not in canonical order.
    std::string line;
    if (!std::getline(is, line)) throw IoError("expansion file is empty");
    std::istringstream header(line);
    std::size_t dim = 0;
    std::uint64_t degree = 0, count = 0;
    std::string norm_text;
    if (!(header >> dim >> degree >> norm_text >> count) || dim == 0)
        throw IoError("malformed expansion header: '" + line + "'");
    const Norm s = parse_norm(norm_text);
    std::vector<Exponent> flat;
    flat.reserve(static_cast<std::size_t>(count) * dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw IoError("expansion file truncated in the index block");
        std::istringstream row(line);
        for (std::size_t k = 0; k < dim; ++k) {
            std::int64_t v = 0;
            if (!(row >> v) || v < 0 || v > std::numeric_limits<Exponent>::max())
                throw IoError("malformed multi-index on line " + std::to_string(i + 2));
            flat.push_back(static_cast<Exponent>(v));
        }
    }
    std::vector<double> coeffs(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw IoError("expansion file truncated in the coefficient block");
        const char* first = line.data();
        const char* last = line.data() + line.size();
        while (first != last && (*first == ' ' || *first == '\t')) ++first;
        while (last != first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
        auto res = std::from_chars(first, last, coeffs[i]);
        if (res.ec != std::errc{} || res.ptr != last)
            throw IoError("malformed coefficient '" + line + "'");
    }
    return detail::make_expansion(dim, s, static_cast<Exponent>(degree), std::move(flat), std::move(coeffs));
}

} // namespace fct
