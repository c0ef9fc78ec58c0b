#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pnlos/fft.hpp"
#include "pnlos/field.hpp"
#include "pnlos/random.hpp"
#include "pnlos/scene.hpp"

namespace pnlos {

namespace detail {

/// Smoothed white noise mapped through its empirical Gaussian CDF, giving
/// approximately uniform samples on [0, 1] with the requested spatial
/// correlation length (autocorrelation FWHM ~ correlation_length).
inline std::vector<double> correlated_uniform(int h, int w, double pitch,
                                              double correlation_length, std::mt19937_64& rng) {
    std::vector<cplx> noise(static_cast<size_t>(h) * w);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : noise) v = cplx{gauss(rng), 0.0};

    // White noise convolved with a Gaussian of std sigma has a Gaussian
    // autocorrelation of std sigma*sqrt(2); FWHM = 2.3548 * sigma * sqrt(2).
    const double sigma = correlation_length / (2.3548200450309493 * std::sqrt(2.0));
    if (sigma > 0.25 * pitch) {
        fft::forward_inplace(noise, h, w);
        const double two_pi_sq = 2.0 * 9.869604401089358;
        for (int y = 0; y < h; ++y) {
            const double fy = fft::sample_frequency(y, h, pitch);
            for (int x = 0; x < w; ++x) {
                const double fx = fft::sample_frequency(x, w, pitch);
                noise[static_cast<size_t>(y) * w + x] *=
                    std::exp(-two_pi_sq * sigma * sigma * (fx * fx + fy * fy));
            }
        }
        fft::inverse_inplace(noise, h, w);
    }

    double mean = 0.0;
    for (const auto& v : noise) mean += v.real();
    mean /= static_cast<double>(noise.size());
    double var = 0.0;
    for (const auto& v : noise) var += (v.real() - mean) * (v.real() - mean);
    var /= static_cast<double>(noise.size());
    const double std_dev = std::sqrt(var);

    std::vector<double> uniform(noise.size(), 0.5);
    if (std_dev > 0.0)
        for (size_t i = 0; i < noise.size(); ++i) {
            const double z = (noise[i].real() - mean) / std_dev;
            uniform[i] = 0.5 * std::erfc(-z / std::sqrt(2.0));
        }
    return uniform;
}

} // namespace detail

/**
 * Synthesizes a random coded-surface profile: modulus approximately uniform
 * in [amp_lo, amp_hi], phase spanning phase_range radians, both smoothed to
 * the requested correlation length. Deterministic for a given seed.
 */
inline CodedSurface synthesize_coded_surface(uint64_t seed, int height, int width, double pitch,
                                             double wavelength, double correlation_length,
                                             double amp_lo, double amp_hi, double phase_range) {
    if (!(amp_lo > 0.0) || !(amp_lo <= amp_hi) || !(amp_hi <= 1.0))
        throw std::invalid_argument("synthesize_coded_surface: need 0 < amp_lo <= amp_hi <= 1");
    if (!(correlation_length >= pitch))
        throw std::invalid_argument(
            "synthesize_coded_surface: correlation_length must be at least one pitch");
    if (!(phase_range >= 0.0))
        throw std::invalid_argument("synthesize_coded_surface: phase_range must be >= 0");

    CodedSurface cs{ComplexField(height, width, pitch, wavelength),
                    {seed, correlation_length, amp_lo, amp_hi, phase_range}};

    auto rng_amp = make_rng(derive_seed(seed, 0));
    auto rng_phase = make_rng(derive_seed(seed, 1));

    std::vector<double> amp(static_cast<size_t>(height) * width, amp_lo);
    if (amp_hi > amp_lo) {
        const auto u = detail::correlated_uniform(height, width, pitch, correlation_length, rng_amp);
        for (size_t i = 0; i < amp.size(); ++i) amp[i] = amp_lo + (amp_hi - amp_lo) * u[i];
    }

    std::vector<double> phase(static_cast<size_t>(height) * width, 0.0);
    if (phase_range > 0.0) {
        const auto u =
            detail::correlated_uniform(height, width, pitch, correlation_length, rng_phase);
        for (size_t i = 0; i < phase.size(); ++i) phase[i] = phase_range * (u[i] - 0.5);
    }

    auto& data = cs.profile.samples();
    for (size_t i = 0; i < data.size(); ++i)
        data[i] = cplx{amp[i] * std::cos(phase[i]), amp[i] * std::sin(phase[i])};
    return cs;
}

} // namespace pnlos
