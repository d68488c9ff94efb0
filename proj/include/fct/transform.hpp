#pragma once

// Forward DCT-II quadrature on first-kind grids:
//
//   b_n = (1/P) sum_{k<P} cos(n (k + 1/2) pi / P) f_k,   n = 0..P-1,
//
// applied along every dimension of a row-major tensor. Small sizes use a
// cached cosine table; larger sizes go through FFTW's REDFT10.

#include "fct/chebgrid.hpp"
#include "fct/errors.hpp"
#include "fct/tensor.hpp"

#include <fftw3.h>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <vector>

namespace fct {

struct SpectralVector {
    GridSpec grid;
    std::vector<double> values;

    SpectralVector(GridSpec g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid.total_points())
            throw DimensionError("spectral vector length does not match the grid");
    }
};

enum class DctPath { automatic, direct, fast };

inline constexpr std::size_t kDirectDctThreshold = 32;

// Textbook O(P^2) sum, kept as the test oracle.
inline std::vector<double> dct_forward_1d_reference(std::span<const double> values) {
    const std::size_t P = values.size();
    std::vector<double> out(P, 0.0);
    for (std::size_t n = 0; n < P; ++n) {
        double acc = 0.0;
        for (std::size_t k = 0; k < P; ++k) acc += cos_node(n, k, P) * values[k];
        out[n] = acc / static_cast<double>(P);
    }
    return out;
}

namespace detail {

// Normalized DCT matrix M[n*P + k] = cos(n theta_k) / P.
class DirectDctPlan {
public:
    explicit DirectDctPlan(std::size_t P) : matrix_(P * P) {
        for (std::size_t n = 0; n < P; ++n)
            for (std::size_t k = 0; k < P; ++k)
                matrix_[n * P + k] = cos_node(n, k, P) / static_cast<double>(P);
    }
    [[nodiscard]] std::span<const double> matrix() const noexcept { return matrix_; }

private:
    std::vector<double> matrix_;
};

class FftwDctPlan {
public:
    explicit FftwDctPlan(std::size_t P) : P_(P) {
        std::vector<double> scratch(P);
        plan_ = fftw_plan_r2r_1d(static_cast<int>(P), scratch.data(), scratch.data(), FFTW_REDFT10,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan_) throw Error("FFTW failed to create a DCT-II plan of size " + std::to_string(P));
    }
    ~FftwDctPlan() { fftw_destroy_plan(plan_); }
    FftwDctPlan(const FftwDctPlan&) = delete;
    FftwDctPlan& operator=(const FftwDctPlan&) = delete;

    // In place; REDFT10 computes 2 sum_k f_k cos(pi n (k+1/2)/P).
    void execute(double* data) const {
        fftw_execute_r2r(plan_, data, data);
        const double scale = 1.0 / (2.0 * static_cast<double>(P_));
        for (std::size_t n = 0; n < P_; ++n) data[n] *= scale;
    }

private:
    std::size_t P_;
    fftw_plan plan_ = nullptr;
};

// Plans are created once per size and shared; FFTW's planner is not
// thread-safe, so creation is serialized.
class DctPlanCache {
public:
    static DctPlanCache& instance() {
        static DctPlanCache cache;
        return cache;
    }

    std::shared_ptr<const DirectDctPlan> direct(std::size_t P) {
        std::lock_guard lock(mutex_);
        auto& slot = direct_[P];
        if (!slot) slot = std::make_shared<const DirectDctPlan>(P);
        return slot;
    }

    std::shared_ptr<const FftwDctPlan> fast(std::size_t P) {
        std::lock_guard lock(mutex_);
        auto& slot = fast_[P];
        if (!slot) slot = std::make_shared<const FftwDctPlan>(P);
        return slot;
    }

private:
    std::mutex mutex_;
    std::map<std::size_t, std::shared_ptr<const DirectDctPlan>> direct_;
    std::map<std::size_t, std::shared_ptr<const FftwDctPlan>> fast_;
};

inline bool use_direct(std::size_t P, DctPath path) {
    if (path == DctPath::direct) return true;
    if (path == DctPath::fast) return false;
    return P <= kDirectDctThreshold;
}

inline void dct_along_axis(std::span<double> data, std::span<const std::uint32_t> extents,
                           std::size_t axis, DctPath path) {
    const std::size_t P = extents[axis];
    if (use_direct(P, path)) {
        if (P == 1) return; // b_0 = f_0
        auto plan = DctPlanCache::instance().direct(P);
        apply_along_axis(data, extents, axis, plan->matrix());
        return;
    }
    auto plan = DctPlanCache::instance().fast(P);
    std::vector<double> line(P);
    for_each_pencil(extents, axis, [&](std::size_t base, std::size_t stride) {
        for (std::size_t k = 0; k < P; ++k) line[k] = data[base + k * stride];
        plan->execute(line.data());
        for (std::size_t k = 0; k < P; ++k) data[base + k * stride] = line[k];
    });
}

} // namespace detail

inline std::vector<double> dct_forward_1d(std::span<const double> values, DctPath path = DctPath::automatic) {
    if (values.empty()) throw DomainError("DCT input must have at least one value");
    std::vector<double> out(values.begin(), values.end());
    const std::uint32_t extent = static_cast<std::uint32_t>(values.size());
    detail::dct_along_axis(out, std::span<const std::uint32_t>(&extent, 1), 0, path);
    return out;
}

// In-place sweep over a row-major buffer laid out on `grid`.
inline void dct_forward_in_place(std::span<double> data, const GridSpec& grid,
                                 DctPath path = DctPath::automatic) {
    if (data.size() != grid.total_points()) throw DimensionError("buffer does not match the grid");
    for (std::size_t axis = 0; axis < grid.dim(); ++axis)
        detail::dct_along_axis(data, grid.counts(), axis, path);
}

// Sweeps the 1D transform along each dimension, in `order` if given.
inline SpectralVector dct_forward(const SampleVector& sample, DctPath path = DctPath::automatic,
                                  std::span<const std::size_t> order = {}) {
    std::vector<double> data = sample.values;
    const auto extents = sample.grid.counts();
    if (order.empty()) {
        for (std::size_t axis = 0; axis < extents.size(); ++axis)
            detail::dct_along_axis(data, extents, axis, path);
    } else {
        if (order.size() != extents.size()) throw DimensionError("sweep order must list every dimension");
        for (std::size_t axis : order) detail::dct_along_axis(data, extents, axis, path);
    }
    return SpectralVector(sample.grid, std::move(data));
}

} // namespace fct
