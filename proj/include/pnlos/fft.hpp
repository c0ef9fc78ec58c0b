#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "pnlos/field.hpp"

namespace pnlos::fft {

namespace detail {

// Plans are cached per (h, w, sign) and shared between threads. Planning is
// serialized (FFTW requirement); fftw_execute_dft on distinct buffers is
// re-entrant. FFTW_UNALIGNED lets one plan serve any heap buffer.
class PlanCache {
  public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int h, int w, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_tuple(h, w, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<double>> scratch(static_cast<size_t>(h) * w);
        fftw_plan plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(scratch.data()),
                                          reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

  private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

} // namespace detail

/// In-place unnormalized forward 2-D DFT.
inline void forward_inplace(cplx* data, int h, int w) {
    fftw_plan plan = detail::PlanCache::instance().get(h, w, FFTW_FORWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
}

/// In-place inverse 2-D DFT, scaled by 1/(h*w) so inverse(forward(x)) == x.
inline void inverse_inplace(cplx* data, int h, int w) {
    fftw_plan plan = detail::PlanCache::instance().get(h, w, FFTW_BACKWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
    const double scale = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
    const size_t n = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < n; ++i) data[i] *= scale;
}

inline void forward_inplace(std::vector<cplx>& data, int h, int w) {
    forward_inplace(data.data(), h, w);
}

inline void inverse_inplace(std::vector<cplx>& data, int h, int w) {
    inverse_inplace(data.data(), h, w);
}

/// DFT sample frequency for bin k of n samples at spacing `pitch`, in
/// cycles per meter. Standard ordering: nonnegative bins first, then the
/// negative half (even n puts the Nyquist bin at -n/2).
inline double sample_frequency(int k, int n, double pitch) {
    const int signed_k = (k < (n + 1) / 2) ? k : k - n;
    return static_cast<double>(signed_k) / (static_cast<double>(n) * pitch);
}

} // namespace pnlos::fft
