#pragma once

// Row-major (last dimension fastest) helpers shared by the grid sampler and
// the transform sweeps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fct::detail {

// Calls fn(base, stride) once per 1D line ("pencil") along `axis` of a
// row-major tensor with the given extents.
template <class Fn>
void for_each_pencil(std::span<const std::uint32_t> extents, std::size_t axis, Fn&& fn) {
    std::size_t stride = 1;
    for (std::size_t j = axis + 1; j < extents.size(); ++j) stride *= extents[j];
    std::size_t outer = 1;
    for (std::size_t j = 0; j < axis; ++j) outer *= extents[j];
    const std::size_t block = stride * extents[axis];
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < stride; ++in) fn(o * block + in, stride);
}

// Applies a dense P x P matrix (row-major, out[r] = sum_c M[r*P+c] in[c]) to
// every pencil along `axis`, in place.
inline void apply_along_axis(std::span<double> data, std::span<const std::uint32_t> extents,
                             std::size_t axis, std::span<const double> matrix) {
    const std::size_t P = extents[axis];
    std::vector<double> line(P), result(P);
    for_each_pencil(extents, axis, [&](std::size_t base, std::size_t stride) {
        for (std::size_t k = 0; k < P; ++k) line[k] = data[base + k * stride];
        for (std::size_t r = 0; r < P; ++r) {
            const double* row = matrix.data() + r * P;
            double acc = 0.0;
            for (std::size_t c = 0; c < P; ++c) acc += row[c] * line[c];
            result[r] = acc;
        }
        for (std::size_t k = 0; k < P; ++k) data[base + k * stride] = result[k];
    });
}

} // namespace fct::detail
