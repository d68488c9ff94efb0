#pragma once

// Multi-index sets S^s_{d,D} = { n in N^D : ||n||_s <= d } for s in {1, 2, inf}.
//
// Indices are kept in graded order: by total degree ||n||_1 first, then
// lexicographically on the entries. Truncating a set to a lower total degree
// is therefore a prefix of the list.

#include "fct/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fct {

using Exponent = std::uint32_t;

// Numeric values double as the norm tag in the cache file header.
enum class Norm : std::uint32_t { one = 1, two = 2, inf = 3 };

inline std::string_view to_string(Norm s) {
    switch (s) {
    case Norm::one: return "1";
    case Norm::two: return "2";
    case Norm::inf: return "inf";
    }
    return "?";
}

inline Norm parse_norm(std::string_view text) {
    if (text == "1") return Norm::one;
    if (text == "2") return Norm::two;
    if (text == "inf" || text == "infinity") return Norm::inf;
    throw DomainError("unknown norm '" + std::string(text) + "' (expected 1, 2 or inf)");
}

inline Norm norm_from_tag(std::uint32_t tag) {
    if (tag < 1 || tag > 3) throw DomainError("invalid norm tag " + std::to_string(tag));
    return static_cast<Norm>(tag);
}

class MultiIndex {
public:
    explicit MultiIndex(std::vector<Exponent> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw DimensionError("multi-index must have dimension >= 1");
    }
    MultiIndex(std::initializer_list<Exponent> entries)
        : MultiIndex(std::vector<Exponent>(entries)) {}
    explicit MultiIndex(std::span<const Exponent> entries)
        : MultiIndex(std::vector<Exponent>(entries.begin(), entries.end())) {}

    [[nodiscard]] std::size_t dim() const noexcept { return entries_.size(); }
    [[nodiscard]] std::span<const Exponent> entries() const noexcept { return entries_; }
    [[nodiscard]] Exponent operator[](std::size_t i) const { return entries_[i]; }

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

private:
    std::vector<Exponent> entries_;
};

inline std::uint64_t total_degree(std::span<const Exponent> n) {
    std::uint64_t sum = 0;
    for (Exponent v : n) sum += v;
    return sum;
}

// Graded order: total degree, then lexicographic.
inline bool canonical_less(std::span<const Exponent> a, std::span<const Exponent> b) {
    const auto da = total_degree(a);
    const auto db = total_degree(b);
    if (da != db) return da < db;
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Exact membership test; s = 2 compares sum n_i^2 <= d^2 in integers.
inline bool within_norm(std::span<const Exponent> n, Norm s, Exponent degree) {
    switch (s) {
    case Norm::one:
        return total_degree(n) <= degree;
    case Norm::two: {
        unsigned __int128 sq = 0;
        for (Exponent v : n) sq += static_cast<unsigned __int128>(v) * v;
        return sq <= static_cast<unsigned __int128>(degree) * degree;
    }
    case Norm::inf:
        return std::all_of(n.begin(), n.end(), [&](Exponent v) { return v <= degree; });
    }
    return false;
}

class IndexSet {
public:
    // Validates membership, sorts into canonical order, rejects duplicates.
    static IndexSet from_flat(std::size_t dim, Norm norm, Exponent degree,
                              std::vector<Exponent> flat) {
        if (dim == 0) throw DimensionError("index set dimension must be >= 1");
        if (flat.size() % dim != 0)
            throw DimensionError("flat index storage is not a multiple of the dimension");
        const std::size_t count = flat.size() / dim;
        for (std::size_t i = 0; i < count; ++i) {
            std::span<const Exponent> n(flat.data() + i * dim, dim);
            if (!within_norm(n, norm, degree))
                throw DomainError("multi-index outside the declared norm ball");
        }
        std::vector<std::size_t> order(count);
        for (std::size_t i = 0; i < count; ++i) order[i] = i;
        auto row = [&](std::size_t i) { return std::span<const Exponent>(flat.data() + i * dim, dim); };
        bool sorted = true;
        for (std::size_t i = 1; i < count && sorted; ++i)
            sorted = canonical_less(row(i - 1), row(i));
        if (!sorted) {
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return canonical_less(row(a), row(b)); });
            std::vector<Exponent> sorted_flat;
            sorted_flat.reserve(flat.size());
            for (std::size_t i : order) {
                auto r = row(i);
                sorted_flat.insert(sorted_flat.end(), r.begin(), r.end());
            }
            flat = std::move(sorted_flat);
            for (std::size_t i = 1; i < count; ++i)
                if (!canonical_less(row(i - 1), row(i)))
                    throw DomainError("duplicate multi-index in index set");
        }
        return IndexSet(dim, norm, degree, std::move(flat));
    }

    static IndexSet from_indices(std::size_t dim, Norm norm, Exponent degree,
                                 const std::vector<MultiIndex>& indices) {
        std::vector<Exponent> flat;
        flat.reserve(indices.size() * dim);
        for (const auto& n : indices) {
            if (n.dim() != dim) throw DimensionError("multi-index dimension mismatch");
            flat.insert(flat.end(), n.entries().begin(), n.entries().end());
        }
        return from_flat(dim, norm, degree, std::move(flat));
    }

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] Norm norm() const noexcept { return norm_; }
    [[nodiscard]] Exponent degree() const noexcept { return degree_; }
    [[nodiscard]] std::size_t size() const noexcept { return flat_.size() / dim_; }
    [[nodiscard]] bool empty() const noexcept { return flat_.empty(); }

    [[nodiscard]] std::span<const Exponent> operator[](std::size_t i) const {
        return {flat_.data() + i * dim_, dim_};
    }
    [[nodiscard]] MultiIndex at(std::size_t i) const { return MultiIndex((*this)[i]); }
    [[nodiscard]] std::span<const Exponent> flat() const noexcept { return flat_; }

    // Largest exponent appearing in dimension i (0 for an empty set).
    [[nodiscard]] Exponent max_exponent(std::size_t i) const { return max_per_dim_[i]; }
    [[nodiscard]] Exponent max_exponent() const {
        return max_per_dim_.empty() ? 0
                                    : *std::max_element(max_per_dim_.begin(), max_per_dim_.end());
    }

    // 64-bit FNV-1a over the little-endian u32 entries of the index list.
    [[nodiscard]] std::uint64_t hash() const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (Exponent v : flat_) {
            for (int b = 0; b < 4; ++b) {
                h ^= static_cast<std::uint8_t>(v >> (8 * b));
                h *= 0x100000001b3ULL;
            }
        }
        return h;
    }

    friend bool operator==(const IndexSet& a, const IndexSet& b) {
        return a.dim_ == b.dim_ && a.norm_ == b.norm_ && a.degree_ == b.degree_ &&
               a.flat_ == b.flat_;
    }

private:
    IndexSet(std::size_t dim, Norm norm, Exponent degree, std::vector<Exponent> flat)
        : dim_(dim), norm_(norm), degree_(degree), flat_(std::move(flat)),
          max_per_dim_(dim, 0) {
        for (std::size_t k = 0; k < flat_.size(); ++k)
            max_per_dim_[k % dim_] = std::max(max_per_dim_[k % dim_], flat_[k]);
    }

    std::size_t dim_;
    Norm norm_;
    Exponent degree_;
    std::vector<Exponent> flat_;
    std::vector<Exponent> max_per_dim_;
};

inline constexpr std::uint64_t kDefaultMaxIndexCount = std::uint64_t{1} << 30;

namespace detail {

using u128 = unsigned __int128;

inline std::uint64_t checked_u64(u128 v, const char* what) {
    if (v > std::numeric_limits<std::uint64_t>::max())
        throw OverflowError(std::string(what) + " exceeds 64-bit range");
    return static_cast<std::uint64_t>(v);
}

inline u128 min_square_sum(u128 total, std::size_t parts) {
    if (parts == 0) return total == 0 ? 0 : std::numeric_limits<std::uint64_t>::max();
    const u128 q = total / parts;
    const u128 r = total % parts;
    return r * (q + 1) * (q + 1) + (parts - r) * q * q;
}

// Number of n in {0..cap}^D with sum n_i^2 <= budget; throws on overflow.
inline std::uint64_t count_square_ball(std::size_t dim, std::uint64_t budget, std::uint64_t cap) {
    const auto B = static_cast<std::size_t>(budget);
    std::vector<u128> ways(B + 1, 0), next(B + 1, 0);
    ways[0] = 1;
    const u128 limit = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t k = 0; k < dim; ++k) {
        std::fill(next.begin(), next.end(), 0);
        for (std::size_t s = 0; s <= B; ++s) {
            if (ways[s] == 0) continue;
            for (std::uint64_t v = 0; v <= cap && s + v * v <= B; ++v) {
                next[s + v * v] += ways[s];
                if (next[s + v * v] > limit) throw OverflowError("index-set cardinality exceeds 64-bit range");
            }
        }
        std::swap(ways, next);
    }
    u128 total = 0;
    for (auto w : ways) total += w;
    return checked_u64(total, "index-set cardinality");
}

// Emits every index in graded order. Per-dimension feasibility checks keep
// the recursion from visiting subtrees without output.
class GradedEnumerator {
public:
    GradedEnumerator(std::size_t dim, Norm norm, Exponent cap, u128 square_budget,
                     std::vector<Exponent>& out)
        : dim_(dim), norm_(norm), cap_(cap), square_budget_(square_budget), out_(out),
          current_(dim, 0) {}

    void run(std::uint64_t max_total) {
        for (std::uint64_t t = 0; t <= max_total; ++t) recurse(0, t, square_budget_);
    }

private:
    bool rest_feasible(std::size_t parts, u128 rest, u128 square_left) const {
        switch (norm_) {
        case Norm::one: return true;
        case Norm::inf: return rest <= static_cast<u128>(parts) * cap_;
        case Norm::two: return min_square_sum(rest, parts) <= square_left;
        }
        return false;
    }

    void recurse(std::size_t pos, std::uint64_t remaining, u128 square_left) {
        const std::size_t left = dim_ - pos;
        if (left == 1) {
            if (remaining > cap_) return;
            if (norm_ == Norm::two && static_cast<u128>(remaining) * remaining > square_left) return;
            current_[pos] = static_cast<Exponent>(remaining);
            out_.insert(out_.end(), current_.begin(), current_.end());
            return;
        }
        const std::uint64_t hi = std::min<std::uint64_t>(remaining, cap_);
        for (std::uint64_t v = 0; v <= hi; ++v) {
            const u128 v2 = static_cast<u128>(v) * v;
            if (norm_ == Norm::two && v2 > square_left) break;
            const u128 sq = norm_ == Norm::two ? square_left - v2 : square_left;
            if (!rest_feasible(left - 1, remaining - v, sq)) continue;
            current_[pos] = static_cast<Exponent>(v);
            recurse(pos + 1, remaining - v, sq);
        }
    }

    std::size_t dim_;
    Norm norm_;
    Exponent cap_;
    u128 square_budget_;
    std::vector<Exponent>& out_;
    std::vector<Exponent> current_;
};

inline std::uint64_t isqrt(std::uint64_t v) {
    auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(v)));
    while (r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    return r;
}

} // namespace detail

// |S^s_{d,D}|: C(d+D, d) for s=1, (d+1)^D for s=inf, exact lattice count for s=2.
inline std::uint64_t cardinality(std::size_t dim, Exponent degree, Norm s) {
    if (dim == 0) throw DimensionError("dimension must be >= 1");
    using detail::u128;
    switch (s) {
    case Norm::one: {
        const std::uint64_t n = static_cast<std::uint64_t>(degree) + dim;
        const std::uint64_t k = std::min<std::uint64_t>(degree, dim);
        u128 c = 1;
        for (std::uint64_t i = 1; i <= k; ++i) {
            c = c * (n - k + i);
            if (c > (static_cast<u128>(1) << 120)) throw OverflowError("index-set cardinality exceeds 64-bit range");
            c /= i;
            detail::checked_u64(c, "index-set cardinality");
        }
        return static_cast<std::uint64_t>(c);
    }
    case Norm::inf: {
        u128 c = 1;
        for (std::size_t i = 0; i < dim; ++i) {
            c *= static_cast<u128>(degree) + 1;
            detail::checked_u64(c, "index-set cardinality");
        }
        return static_cast<std::uint64_t>(c);
    }
    case Norm::two:
        return detail::count_square_ball(dim, static_cast<std::uint64_t>(degree) * degree, degree);
    }
    return 0;
}

inline IndexSet enumerate_index_set(std::size_t dim, Exponent degree, Norm s,
                                    std::uint64_t max_count = kDefaultMaxIndexCount) {
    if (dim == 0) throw DimensionError("dimension must be >= 1");
    std::uint64_t count = 0;
    try {
        count = cardinality(dim, degree, s);
    } catch (const OverflowError&) {
        throw CapacityError("index set S^" + std::string(to_string(s)) + "_{" +
                            std::to_string(degree) + "," + std::to_string(dim) +
                            "} is too large to enumerate");
    }
    if (count > max_count)
        throw CapacityError("index set has " + std::to_string(count) +
                            " members, above the configured maximum of " + std::to_string(max_count));

    std::vector<Exponent> flat;
    flat.reserve(static_cast<std::size_t>(count) * dim);
    const detail::u128 budget = static_cast<detail::u128>(degree) * degree;
    std::uint64_t max_total = 0;
    switch (s) {
    case Norm::one: max_total = degree; break;
    case Norm::inf: max_total = static_cast<std::uint64_t>(degree) * dim; break;
    case Norm::two:
        while (detail::min_square_sum(max_total + 1, dim) <= budget) ++max_total;
        break;
    }
    detail::GradedEnumerator(dim, s, degree, budget, flat).run(max_total);
    return IndexSet::from_flat(dim, s, degree, std::move(flat));
}

// Euclidean ball { n : sum n_i^2 <= radius_squared }. Reported as an s=2 set
// whose degree is ceil(sqrt(radius_squared)).
inline IndexSet enumerate_euclidean_set(std::size_t dim, std::uint64_t radius_squared,
                                        std::uint64_t max_count = kDefaultMaxIndexCount) {
    if (dim == 0) throw DimensionError("dimension must be >= 1");
    const std::uint64_t cap = detail::isqrt(radius_squared);
    const std::uint64_t count = detail::count_square_ball(dim, radius_squared, cap);
    if (count > max_count)
        throw CapacityError("Euclidean index set has " + std::to_string(count) +
                            " members, above the configured maximum");
    std::uint64_t degree = cap;
    if (degree * degree < radius_squared) ++degree;
    std::vector<Exponent> flat;
    flat.reserve(static_cast<std::size_t>(count) * dim);
    std::uint64_t max_total = 0;
    while (detail::min_square_sum(max_total + 1, dim) <= radius_squared) ++max_total;
    detail::GradedEnumerator(dim, Norm::two, static_cast<Exponent>(cap), radius_squared, flat)
        .run(max_total);
    return IndexSet::from_flat(dim, Norm::two, static_cast<Exponent>(degree), std::move(flat));
}

inline std::optional<std::size_t> position_of(const IndexSet& set, std::span<const Exponent> n) {
    if (n.size() != set.dim())
        throw DimensionError("multi-index has dimension " + std::to_string(n.size()) +
                             ", index set has " + std::to_string(set.dim()));
    std::size_t lo = 0, hi = set.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (canonical_less(set[mid], n)) lo = mid + 1;
        else hi = mid;
    }
    if (lo < set.size() && std::equal(n.begin(), n.end(), set[lo].begin())) return lo;
    return std::nullopt;
}

inline std::optional<std::size_t> position_of(const IndexSet& set, const MultiIndex& n) {
    return position_of(set, n.entries());
}

// Text format: "D d s count", then one index per line.
inline void write_index_set(std::ostream& os, const IndexSet& set) {
    os << set.dim() << ' ' << set.degree() << ' ' << to_string(set.norm()) << ' ' << set.size()
       << '\n';
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto n = set[i];
        for (std::size_t k = 0; k < n.size(); ++k) os << (k ? " " : "") << n[k];
        os << '\n';
    }
}

inline IndexSet read_index_set(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("index-set file is empty");
    std::istringstream header(line);
    std::size_t dim = 0;
    std::uint64_t degree = 0, count = 0;
    std::string norm_text;
    if (!(header >> dim >> degree >> norm_text >> count) || dim == 0)
        throw IoError("malformed index-set header: '" + line + "'");
    Norm s = parse_norm(norm_text);
    std::vector<Exponent> flat;
    flat.reserve(static_cast<std::size_t>(count) * dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw IoError("index-set file truncated");
        std::istringstream row(line);
        for (std::size_t k = 0; k < dim; ++k) {
            std::int64_t v = 0;
            if (!(row >> v) || v < 0 || v > std::numeric_limits<Exponent>::max())
                throw IoError("malformed multi-index on line " + std::to_string(i + 2));
            flat.push_back(static_cast<Exponent>(v));
        }
        std::string extra;
        if (row >> extra) throw IoError("too many entries on line " + std::to_string(i + 2));
    }
    return IndexSet::from_flat(dim, s, static_cast<Exponent>(degree), std::move(flat));
}

} // namespace fct
