#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace pnlos {

/// Anisotropic total variation: sum of |forward difference| along x and y
/// with Neumann boundaries.
inline double tv_anisotropic(const std::vector<double>& u, int h, int w) {
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (x + 1 < w) acc += std::abs(u[i + 1] - u[i]);
            if (y + 1 < h) acc += std::abs(u[i + w] - u[i]);
        }
    return acc;
}

/**
 * Proximal operator of lambda * TV_aniso via dual projection iterations
 * (Chambolle-type): solves min_u 0.5*||u - f||^2 + lambda*TV(u). The dual
 * variable is clamped componentwise; step 0.25 is inside the stable range.
 */
inline std::vector<double> tv_prox(const std::vector<double>& f, int h, int w, double lambda,
                                   int iterations) {
    if (lambda <= 0.0 || iterations < 1) return f;
    const size_t n = f.size();
    std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0), u(n, 0.0);
    const double tau = 0.25;

    auto compute_div = [&]() {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                double d = 0.0;
                if (x + 1 < w) d += px[i];
                if (x > 0) d -= px[i - 1];
                if (y + 1 < h) d += py[i];
                if (y > 0) d -= py[i - w];
                div[i] = d;
            }
    };

    for (int it = 0; it < iterations; ++it) {
        compute_div();
        for (size_t i = 0; i < n; ++i) u[i] = div[i] - f[i] / lambda;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                const double gx = (x + 1 < w) ? u[i + 1] - u[i] : 0.0;
                const double gy = (y + 1 < h) ? u[i + w] - u[i] : 0.0;
                px[i] = std::clamp(px[i] + tau * gx, -1.0, 1.0);
                py[i] = std::clamp(py[i] + tau * gy, -1.0, 1.0);
            }
    }
    compute_div();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = f[i] - lambda * div[i];
    return out;
}

} // namespace pnlos
