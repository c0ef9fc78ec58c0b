#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "pnlos/fft.hpp"
#include "pnlos/field.hpp"

namespace pnlos {

namespace detail {

/// Circular translation by whole pixels: out(y, x) = in(y - dy, x - dx).
template <typename T>
void roll(const std::vector<T>& in, std::vector<T>& out, int h, int w, int dy, int dx) {
    dy = ((dy % h) + h) % h;
    dx = ((dx % w) + w) % w;
    for (int y = 0; y < h; ++y) {
        const int sy = (y - dy + h) % h;
        const T* src = in.data() + static_cast<size_t>(sy) * w;
        T* dst = out.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) dst[x] = src[(x - dx + w) % w];
    }
}

/// Fourier-domain linear phase ramp implementing a circular translation by
/// a fractional number of pixels. data is already the forward DFT.
inline void apply_shift_ramp(std::vector<cplx>& data, int h, int w, double dy, double dx) {
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<cplx> ramp_x(static_cast<size_t>(w));
    for (int x = 0; x < w; ++x) {
        const int k = (x < (w + 1) / 2) ? x : x - w;
        const double phase = -two_pi * static_cast<double>(k) * dx / w;
        ramp_x[x] = cplx{std::cos(phase), std::sin(phase)};
    }
    for (int y = 0; y < h; ++y) {
        const int k = (y < (h + 1) / 2) ? y : y - h;
        const double phase = -two_pi * static_cast<double>(k) * dy / h;
        const cplx ramp_y{std::cos(phase), std::sin(phase)};
        cplx* row = data.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) row[x] *= ramp_y * ramp_x[x];
    }
}

} // namespace detail

/**
 * Translates the field by (dx, dy) pixels with circular boundary handling.
 * Integer shifts are exact index translations; fractional shifts go through
 * a Fourier-domain phase ramp, which preserves energy exactly.
 *
 * Preconditions: |dx|, |dy| < min(height, width) / 2.
 */
inline ComplexField shift_field(const ComplexField& field, double dx, double dy) {
    const double limit = 0.5 * std::min(field.height(), field.width());
    if (!(std::abs(dx) < limit) || !(std::abs(dy) < limit))
        throw std::invalid_argument("shift_field: |shift| must be below half the smaller grid "
                                    "dimension");
    if (dx == 0.0 && dy == 0.0) return field;

    const double rx = std::round(dx);
    const double ry = std::round(dy);
    if (rx == dx && ry == dy) {
        ComplexField out = ComplexField::like(field);
        detail::roll(field.samples(), out.samples(), field.height(), field.width(),
                     static_cast<int>(ry), static_cast<int>(rx));
        return out;
    }

    ComplexField out = field;
    auto& data = out.samples();
    fft::forward_inplace(data, field.height(), field.width());
    detail::apply_shift_ramp(data, field.height(), field.width(), dy, dx);
    fft::inverse_inplace(data, field.height(), field.width());
    return out;
}

/**
 * Circular translation of a real-valued raster by fractional pixels, used
 * for aligning intensity frames. Fractional shifts take the real part of
 * the Fourier-shifted signal; values may ring slightly negative.
 */
inline std::vector<double> shift_real(const std::vector<double>& in, int h, int w, double dx,
                                      double dy) {
    if (dx == 0.0 && dy == 0.0) return in;
    const double rx = std::round(dx);
    const double ry = std::round(dy);
    if (rx == dx && ry == dy) {
        std::vector<double> out(in.size());
        detail::roll(in, out, h, w, static_cast<int>(ry), static_cast<int>(rx));
        return out;
    }
    std::vector<cplx> buf(in.size());
    for (size_t i = 0; i < in.size(); ++i) buf[i] = cplx{in[i], 0.0};
    fft::forward_inplace(buf, h, w);
    detail::apply_shift_ramp(buf, h, w, dy, dx);
    fft::inverse_inplace(buf, h, w);
    std::vector<double> out(in.size());
    for (size_t i = 0; i < in.size(); ++i) out[i] = buf[i].real();
    return out;
}

} // namespace pnlos
