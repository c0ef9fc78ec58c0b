#pragma once

#include <stdexcept>
#include <vector>

#include "pnlos/field.hpp"

namespace pnlos {

/**
 * Brenner contrast index: sum over (I(x+2, y) - I(x, y))^2 with the classic
 * two-sample stride, differences taken along x only. Invariant under
 * additive offsets; scales with the square of a multiplicative gain. Zero
 * exactly when the frame is constant along x at stride 2.
 */
inline double brenner_index_raw(const std::vector<double>& data, int h, int w) {
    if (w < 3) throw std::invalid_argument("brenner_index: frame narrower than 3 columns");
    double acc = 0.0;
    for (int y = 0; y < h; ++y) {
        const double* row = data.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x + 2 < w; ++x) {
            const double d = row[x + 2] - row[x];
            acc += d * d;
        }
    }
    return acc;
}

inline double brenner_index(const IntensityFrame& frame) {
    return brenner_index_raw(frame.samples(), frame.height(), frame.width());
}

/// Brenner index of a rectangular crop [y0, y1) x [x0, x1) of a raster.
inline double brenner_index_crop(const std::vector<double>& data, int h, int w, int y0, int y1,
                                 int x0, int x1) {
    if (y0 < 0 || x0 < 0 || y1 > h || x1 > w || y1 <= y0 || x1 <= x0)
        throw std::invalid_argument("brenner_index_crop: crop outside raster");
    if (x1 - x0 < 3) throw std::invalid_argument("brenner_index_crop: crop narrower than 3");
    double acc = 0.0;
    for (int y = y0; y < y1; ++y) {
        const double* row = data.data() + static_cast<size_t>(y) * w;
        for (int x = x0; x + 2 < x1; ++x) {
            const double d = row[x + 2] - row[x];
            acc += d * d;
        }
    }
    return acc;
}

} // namespace pnlos
