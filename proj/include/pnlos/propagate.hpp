#pragma once

#include <cmath>
#include <cstdint>
#include <list>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "pnlos/errors.hpp"
#include "pnlos/fft.hpp"
#include "pnlos/field.hpp"

namespace pnlos {

/**
 * Transfer function of band-limited angular-spectrum free-space propagation
 * over a signed distance.
 *
 * Inside the band-limit mask the transfer samples have unit modulus
 * exp(i*2*pi*d*(sqrt(1/lambda^2 - fx^2 - fy^2) - 1/lambda)); outside they
 * are exactly zero. The phase is referenced to the axial plane wave: the
 * piston exp(i*2*pi*d/lambda) is a global phase with no effect on any
 * intensity, and carrying it would put meter-scale propagations at 1e7 rad
 * where double-precision phase roundoff breaks kernel composition. The mask
 * combines the evanescent cutoff with the anti-aliasing rectangle
 * f_limit = 1 / (lambda * sqrt((2*df*|d|)^2 + 1)) per axis, where df is the
 * grid's frequency sampling interval. The kernel for -d is the complex
 * conjugate of the kernel for +d on the same grid.
 */
struct PropagationKernel {
    double distance = 0.0;
    int height = 0;
    int width = 0;
    double pitch = 0.0;
    double wavelength = 0.0;
    std::vector<cplx> transfer;
    std::vector<uint8_t> mask;

    static PropagationKernel make(int height, int width, double pitch, double wavelength,
                                  double distance) {
        if (height < 2 || width < 2)
            throw std::invalid_argument("PropagationKernel: grid must be at least 2x2");
        if (!(pitch > 0.0) || !(wavelength > 0.0))
            throw std::invalid_argument("PropagationKernel: pitch and wavelength must be positive");
        if (!std::isfinite(distance))
            throw std::invalid_argument("PropagationKernel: distance must be finite");

        // Grid extent below a wavelength cannot represent a single non-DC
        // propagating frequency; reject naming the limiting dimension.
        if (static_cast<double>(height) * pitch < wavelength)
            throw std::invalid_argument(
                "PropagationKernel: grid height extent " +
                std::to_string(height * pitch) +
                " m is below the wavelength; no propagating frequency fits (height is limiting)");
        if (static_cast<double>(width) * pitch < wavelength)
            throw std::invalid_argument(
                "PropagationKernel: grid width extent " + std::to_string(width * pitch) +
                " m is below the wavelength; no propagating frequency fits (width is limiting)");

        PropagationKernel k;
        k.distance = distance;
        k.height = height;
        k.width = width;
        k.pitch = pitch;
        k.wavelength = wavelength;
        k.transfer.assign(static_cast<size_t>(height) * width, cplx{0.0, 0.0});
        k.mask.assign(static_cast<size_t>(height) * width, 0);

        const double dfy = 1.0 / (static_cast<double>(height) * pitch);
        const double dfx = 1.0 / (static_cast<double>(width) * pitch);
        const double ad = std::abs(distance);
        const double fy_limit = 1.0 / (wavelength * std::sqrt(4.0 * dfy * dfy * ad * ad + 1.0));
        const double fx_limit = 1.0 / (wavelength * std::sqrt(4.0 * dfx * dfx * ad * ad + 1.0));
        const double two_pi = 2.0 * std::numbers::pi;

        for (int y = 0; y < height; ++y) {
            const double fy = fft::sample_frequency(y, height, pitch);
            for (int x = 0; x < width; ++x) {
                const double fx = fft::sample_frequency(x, width, pitch);
                // s = (lambda f)^2; propagating while s < 1
                const double s =
                    wavelength * wavelength * fx * fx + wavelength * wavelength * fy * fy;
                const bool in_band =
                    s < 1.0 && std::abs(fx) <= fx_limit && std::abs(fy) <= fy_limit;
                if (!in_band) continue;
                const size_t i = static_cast<size_t>(y) * width + x;
                // w - 1/lambda, evaluated without cancellation
                const double w_rel = -s / (wavelength * (1.0 + std::sqrt(1.0 - s)));
                const double phase = two_pi * distance * w_rel;
                k.transfer[i] = cplx{std::cos(phase), std::sin(phase)};
                k.mask[i] = 1;
            }
        }
        return k;
    }
};

namespace detail {

// Small LRU cache of kernels; the reconstruction and sweep loops reuse a
// handful of distances many thousands of times.
class KernelCache {
  public:
    static KernelCache& instance() {
        static KernelCache cache;
        return cache;
    }

    const PropagationKernel& get(int h, int w, double pitch, double wavelength, double distance) {
        std::lock_guard<std::mutex> lock(mutex_);
        Key key{h, w, pitch, wavelength, distance};
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second.lru_it);
            return it->second.kernel;
        }
        PropagationKernel kernel = PropagationKernel::make(h, w, pitch, wavelength, distance);
        lru_.push_front(key);
        auto [pos, inserted] = entries_.emplace(key, Entry{std::move(kernel), lru_.begin()});
        if (entries_.size() > capacity_) {
            entries_.erase(lru_.back());
            lru_.pop_back();
        }
        return pos->second.kernel;
    }

  private:
    using Key = std::tuple<int, int, double, double, double>;
    struct Entry {
        PropagationKernel kernel;
        std::list<Key>::iterator lru_it;
    };
    KernelCache() = default;
    std::mutex mutex_;
    std::map<Key, Entry> entries_;
    std::list<Key> lru_;
    size_t capacity_ = 96;
};

} // namespace detail

/// Applies a precomputed kernel: FFT, multiply by the transfer function,
/// inverse FFT. Energy outside the band-limit mask is removed.
inline ComplexField apply(const PropagationKernel& kernel, const ComplexField& field) {
    if (kernel.height != field.height() || kernel.width != field.width())
        throw std::invalid_argument("apply: kernel/field grid mismatch");
    ComplexField out = field;
    auto& data = out.samples();
    fft::forward_inplace(data, kernel.height, kernel.width);
    for (size_t i = 0; i < data.size(); ++i) data[i] *= kernel.transfer[i];
    fft::inverse_inplace(data, kernel.height, kernel.width);
    return out;
}

/**
 * Free-space propagation of `field` by a signed `distance` in meters using
 * the band-limited angular spectrum method. Distance zero returns the input
 * unchanged. Grid shape, pitch and wavelength are preserved; energy can only
 * decrease (band limiting).
 */
inline ComplexField propagate(const ComplexField& field, double distance) {
    if (!std::isfinite(distance))
        throw std::invalid_argument("propagate: distance must be finite");
    if (distance == 0.0) return field;
    const PropagationKernel& kernel = detail::KernelCache::instance().get(
        field.height(), field.width(), field.pitch(), field.wavelength(), distance);
    return apply(kernel, field);
}

} // namespace pnlos
