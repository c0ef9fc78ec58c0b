#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "pnlos/fft.hpp"
#include "pnlos/field.hpp"

namespace pnlos {

/// Result of a translation registration: `b` best matches `a` circularly
/// shifted by (dx, dy) pixels. `normalized_peak` is the correlation peak
/// divided by the product of the input L2 norms (cosine similarity).
struct CorrelationPeak {
    double dy = 0.0;
    double dx = 0.0;
    double normalized_peak = 0.0;
};

namespace detail {

/// Subtracts the mean and applies a separable raised-cosine edge taper
/// covering `taper_fraction` of each border. Suppresses wrap-around
/// correlation artifacts.
inline std::vector<double> window_for_correlation(const std::vector<double>& in, int h, int w,
                                                  double taper_fraction) {
    std::vector<double> out(in.size());
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(in.size());

    auto taper_1d = [&](int n) {
        std::vector<double> t(static_cast<size_t>(n), 1.0);
        const int m = static_cast<int>(std::floor(taper_fraction * n));
        for (int i = 0; i < m; ++i) {
            const double v = 0.5 * (1.0 - std::cos(std::numbers::pi * (i + 0.5) / m));
            t[i] = v;
            t[n - 1 - i] = v;
        }
        return t;
    };
    const std::vector<double> ty = taper_1d(h);
    const std::vector<double> tx = taper_1d(w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(y) * w + x] =
                (in[static_cast<size_t>(y) * w + x] - mean) * ty[y] * tx[x];
    return out;
}

/// Evaluates the cross-correlation spectrum on an upsampled grid around
/// (cy, cx) via direct small-matrix DFTs (the usual upsampled-DFT trick:
/// only the neighborhood of the coarse peak is ever materialized).
inline void upsampled_peak(const std::vector<cplx>& cc_spectrum, int h, int w, double cy,
                           double cx, double halfwidth, int upsample, double& best_y,
                           double& best_x, double& best_val) {
    const int steps = std::max(1, static_cast<int>(std::round(2.0 * halfwidth * upsample))) + 1;
    const double step = 1.0 / upsample;
    const double two_pi = 2.0 * std::numbers::pi;

    // ey[s][ky], ex[kx][s]
    std::vector<cplx> ey(static_cast<size_t>(steps) * h);
    std::vector<cplx> ex(static_cast<size_t>(w) * steps);
    for (int s = 0; s < steps; ++s) {
        const double yy = cy - halfwidth + s * step;
        for (int ky = 0; ky < h; ++ky) {
            const int sk = (ky < (h + 1) / 2) ? ky : ky - h;
            const double ph = two_pi * sk * yy / h;
            ey[static_cast<size_t>(s) * h + ky] = cplx{std::cos(ph), std::sin(ph)};
        }
    }
    for (int s = 0; s < steps; ++s) {
        const double xx = cx - halfwidth + s * step;
        for (int kx = 0; kx < w; ++kx) {
            const int sk = (kx < (w + 1) / 2) ? kx : kx - w;
            const double ph = two_pi * sk * xx / w;
            ex[static_cast<size_t>(kx) * steps + s] = cplx{std::cos(ph), std::sin(ph)};
        }
    }

    // mid[s][kx] = sum_ky ey[s][ky] * cc[ky][kx]
    std::vector<cplx> mid(static_cast<size_t>(steps) * w, cplx{0.0, 0.0});
    for (int s = 0; s < steps; ++s) {
        cplx* mrow = mid.data() + static_cast<size_t>(s) * w;
        for (int ky = 0; ky < h; ++ky) {
            const cplx e = ey[static_cast<size_t>(s) * h + ky];
            const cplx* crow = cc_spectrum.data() + static_cast<size_t>(ky) * w;
            for (int kx = 0; kx < w; ++kx) mrow[kx] += e * crow[kx];
        }
    }

    best_val = -1.0;
    const double scale = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
    for (int sy = 0; sy < steps; ++sy) {
        for (int sx = 0; sx < steps; ++sx) {
            cplx acc{0.0, 0.0};
            const cplx* mrow = mid.data() + static_cast<size_t>(sy) * w;
            for (int kx = 0; kx < w; ++kx) acc += mrow[kx] * ex[static_cast<size_t>(kx) * steps + sx];
            const double val = acc.real() * scale;
            if (val > best_val) {
                best_val = val;
                best_y = cy - halfwidth + sy * step;
                best_x = cx - halfwidth + sx * step;
            }
        }
    }
}

} // namespace detail

/**
 * Registers translation between two equally shaped real rasters by circular
 * cross-correlation, refined to subpixel precision (1/upsample of a pixel)
 * with a local upsampled DFT around the coarse peak.
 */
inline CorrelationPeak register_translation(const std::vector<double>& a,
                                            const std::vector<double>& b, int h, int w,
                                            int upsample = 16) {
    std::vector<cplx> fa(a.size()), fb(b.size());
    for (size_t i = 0; i < a.size(); ++i) fa[i] = cplx{a[i], 0.0};
    for (size_t i = 0; i < b.size(); ++i) fb[i] = cplx{b[i], 0.0};
    fft::forward_inplace(fa, h, w);
    fft::forward_inplace(fb, h, w);

    std::vector<cplx> cc(a.size());
    for (size_t i = 0; i < a.size(); ++i) cc[i] = fb[i] * std::conj(fa[i]);

    std::vector<cplx> corr = cc;
    fft::inverse_inplace(corr, h, w);
    int py = 0, px = 0;
    double pv = corr[0].real();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = corr[static_cast<size_t>(y) * w + x].real();
            if (v > pv) {
                pv = v;
                py = y;
                px = x;
            }
        }
    double cy = (py <= h / 2) ? py : py - h;
    double cx = (px <= w / 2) ? px : px - w;

    CorrelationPeak result;
    double by = cy, bx = cx, bv = pv;
    if (upsample > 1)
        detail::upsampled_peak(cc, h, w, cy, cx, 0.6, upsample, by, bx, bv);
    result.dy = by;
    result.dx = bx;

    double na = 0.0, nb = 0.0;
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    const double denom = std::sqrt(na) * std::sqrt(nb);
    result.normalized_peak = denom > 0.0 ? bv / denom : 0.0;
    return result;
}

/**
 * Plain normalized cross-correlation of two nonnegative rasters after the
 * best circular integer alignment, in [0, 1]. Used as the recovery-fidelity
 * score between reconstructed and reference moduli.
 */
inline double registered_correlation(const std::vector<double>& reference,
                                     const std::vector<double>& image, int h, int w) {
    std::vector<cplx> fa(reference.size()), fb(image.size());
    for (size_t i = 0; i < reference.size(); ++i) fa[i] = cplx{reference[i], 0.0};
    for (size_t i = 0; i < image.size(); ++i) fb[i] = cplx{image[i], 0.0};
    fft::forward_inplace(fa, h, w);
    fft::forward_inplace(fb, h, w);
    std::vector<cplx> corr(fa.size());
    for (size_t i = 0; i < fa.size(); ++i) corr[i] = fb[i] * std::conj(fa[i]);
    fft::inverse_inplace(corr, h, w);
    double peak = 0.0;
    for (const cplx& v : corr) peak = std::max(peak, v.real());
    double na = 0.0, nb = 0.0;
    for (double v : reference) na += v * v;
    for (double v : image) nb += v * v;
    const double denom = std::sqrt(na * nb);
    return denom > 0.0 ? peak / denom : 0.0;
}

} // namespace pnlos
