#pragma once

// Platform-stable pseudo-random stream: xoshiro256** seeded through
// splitmix64. Bounded integers use Lemire's unbiased multiply-shift, so a
// given seed reproduces the same draws on every compiler and libc.

#include "fct/errors.hpp"

#include <array>
#include <cstdint>
#include <numeric>
#include <unordered_set>
#include <vector>

namespace fct {

class RngStream {
public:
    // Recorded in cache headers; bump when the draw sequence changes.
    static constexpr std::uint32_t kAlgorithmId = 1;
    static constexpr const char* kAlgorithmName = "xoshiro256starstar-splitmix64-v1";

    explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw DomainError("RngStream::below requires a positive bound");
        using u128 = unsigned __int128;
        u128 m = static_cast<u128>(next_u64()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<u128>(next_u64()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform in [lo, hi], inclusive.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        if (hi < lo) throw DomainError("RngStream::uniform_int with empty range");
        if (lo == 0 && hi == ~std::uint64_t{0}) return next_u64();
        return lo + below(hi - lo + 1);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

    // Fisher-Yates shuffle of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

// Draws `count` distinct tuples uniformly from {0..base-1}^dim, returned flat
// in draw order. Uses Floyd's algorithm on ranks when the tuple space fits in
// 64 bits, otherwise rejection on whole tuples.
inline std::vector<std::uint32_t> sample_distinct_tuples(std::size_t dim, std::uint32_t base,
                                                         std::uint64_t count, RngStream& rng) {
    if (dim == 0 || base == 0) throw DomainError("tuple space must be non-empty");
    using u128 = unsigned __int128;
    u128 space = 1;
    bool fits = true;
    for (std::size_t i = 0; i < dim && fits; ++i) {
        space *= base;
        if (space > (static_cast<u128>(1) << 63)) fits = false;
    }
    if (fits && count > static_cast<std::uint64_t>(space))
        throw InfeasibleError("cannot draw " + std::to_string(count) + " distinct tuples from a space of " +
                              std::to_string(static_cast<std::uint64_t>(space)));

    std::vector<std::uint32_t> out;
    out.reserve(static_cast<std::size_t>(count) * dim);
    if (fits) {
        const auto total = static_cast<std::uint64_t>(space);
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(static_cast<std::size_t>(count) * 2);
        std::vector<std::uint64_t> order;
        order.reserve(static_cast<std::size_t>(count));
        for (std::uint64_t j = total - count; j < total; ++j) {
            std::uint64_t r = rng.below(j + 1);
            if (!chosen.insert(r).second) {
                r = j;
                chosen.insert(r);
            }
            order.push_back(r);
        }
        for (std::uint64_t r : order) {
            const std::size_t start = out.size();
            out.resize(start + dim);
            for (std::size_t k = dim; k-- > 0;) {
                out[start + k] = static_cast<std::uint32_t>(r % base);
                r /= base;
            }
        }
        return out;
    }

    struct TupleHash {
        std::size_t operator()(const std::vector<std::uint32_t>& t) const noexcept {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (auto v : t) h = (h ^ v) * 0x100000001b3ULL;
            return static_cast<std::size_t>(h);
        }
    };
    std::unordered_set<std::vector<std::uint32_t>, TupleHash> seen;
    seen.reserve(static_cast<std::size_t>(count) * 2);
    std::vector<std::uint32_t> tuple(dim);
    while (seen.size() < count) {
        for (auto& v : tuple) v = static_cast<std::uint32_t>(rng.below(base));
        if (seen.insert(tuple).second) out.insert(out.end(), tuple.begin(), tuple.end());
    }
    return out;
}

} // namespace fct
