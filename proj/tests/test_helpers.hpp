#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "pnlos/field.hpp"
#include "pnlos/propagate.hpp"

namespace pnlos::testing {

inline double rms_difference(const ComplexField& a, const ComplexField& b) {
    double acc = 0.0;
    for (size_t k = 0; k < a.size(); ++k) acc += std::norm(a.samples()[k] - b.samples()[k]);
    return std::sqrt(acc / static_cast<double>(a.size()));
}

inline double rms(const ComplexField& a) {
    return std::sqrt(a.energy() / static_cast<double>(a.size()));
}

/// Random field whose spectrum lies strictly inside the band-limit mask of
/// the propagation kernel for `distance`, normalized to unit RMS.
inline ComplexField band_limited_random(int h, int w, double pitch, double wavelength,
                                        double distance, std::mt19937_64& rng) {
    const PropagationKernel kernel = PropagationKernel::make(h, w, pitch, wavelength, distance);
    ComplexField field(h, w, pitch, wavelength);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto& data = field.samples();
    for (size_t k = 0; k < data.size(); ++k)
        if (kernel.mask[k]) data[k] = cplx{gauss(rng), gauss(rng)};
    fft::inverse_inplace(data, h, w);
    const double scale = 1.0 / rms(field);
    for (cplx& v : data) v *= scale;
    return field;
}

/// Smooth random field (spectrum limited to low frequencies), unit RMS.
inline ComplexField smooth_random(int h, int w, double pitch, double wavelength, int max_bin,
                                  std::mt19937_64& rng) {
    ComplexField field(h, w, pitch, wavelength);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto& data = field.samples();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int ky = (y < (h + 1) / 2) ? y : y - h;
            const int kx = (x < (w + 1) / 2) ? x : x - w;
            if (std::abs(ky) <= max_bin && std::abs(kx) <= max_bin)
                data[static_cast<size_t>(y) * w + x] = cplx{gauss(rng), gauss(rng)};
        }
    fft::inverse_inplace(data, h, w);
    const double scale = 1.0 / rms(field);
    for (cplx& v : data) v *= scale;
    return field;
}

} // namespace pnlos::testing
