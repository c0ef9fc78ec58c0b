#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "pnlos/field.hpp"
#include "pnlos/metrics.hpp"
#include "pnlos/parallel.hpp"
#include "pnlos/registration.hpp"
#include "pnlos/scene.hpp"
#include "pnlos/shift.hpp"

namespace pnlos {

/// Brenner-vs-scale curve from a shift-and-add scan plus detected peaks.
struct ScaleScanResult {
    std::vector<double> alphas;
    std::vector<double> brenner;
    std::vector<std::pair<double, double>> peaks;  // (alpha, prominence)
};

/// One candidate hidden layer: its trajectory scale factor and per-frame
/// wall-plane shifts in pixels. refinement_history records the RMS shift
/// correction applied by each refinement pass (convergence monitor).
struct LayerHypothesis {
    double alpha = 0.0;
    std::vector<std::array<double, 2>> shifts_px;
    std::vector<double> refinement_history;
    int correlation_warnings = 0;
};

namespace detail {

/// Centered trajectory in pixels: (s_i - centroid) / pitch.
inline std::vector<std::array<double, 2>> centered_trajectory_px(const ScanTrajectory& trajectory,
                                                                 double pitch) {
    const auto c = trajectory.centroid();
    std::vector<std::array<double, 2>> t;
    t.reserve(trajectory.count());
    for (const auto& p : trajectory.positions)
        t.push_back({(p[0] - c[0]) / pitch, (p[1] - c[1]) / pitch});
    return t;
}

} // namespace detail

/**
 * Mean of all frames after undoing the per-frame shifts (back-shift of
 * frame i by -shifts_px[i]). Fractional shifts ring slightly; the composite
 * is clamped at zero to stay a valid intensity frame.
 */
inline IntensityFrame shift_and_add(const std::vector<IntensityFrame>& frames,
                                    const std::vector<std::array<double, 2>>& shifts_px) {
    if (frames.empty()) throw std::invalid_argument("shift_and_add: no frames");
    if (frames.size() != shifts_px.size())
        throw std::invalid_argument("shift_and_add: shift table length mismatch");
    const int h = frames.front().height();
    const int w = frames.front().width();
    std::vector<double> acc(static_cast<size_t>(h) * w, 0.0);
    for (size_t i = 0; i < frames.size(); ++i) {
        const std::vector<double> back =
            shift_real(frames[i].samples(), h, w, -shifts_px[i][0], -shifts_px[i][1]);
        for (size_t k = 0; k < acc.size(); ++k) acc[k] += back[k];
    }
    IntensityFrame out(h, w, frames.front().pitch());
    const double inv_n = 1.0 / static_cast<double>(frames.size());
    for (size_t k = 0; k < acc.size(); ++k) out.samples()[k] = std::max(0.0, acc[k] * inv_n);
    return out;
}

/// Shift-and-add for a pure trajectory scaling: back-shifts frame i by
/// -alpha * (s_i - centroid), trajectory meters converted to pixels.
inline IntensityFrame shift_and_add(const Ptychogram& gram, const ScanTrajectory& trajectory,
                                    double alpha) {
    if (!std::isfinite(alpha)) throw std::invalid_argument("shift_and_add: alpha must be finite");
    const auto t = detail::centered_trajectory_px(trajectory, gram.meta.pitch);
    std::vector<std::array<double, 2>> shifts(t.size());
    for (size_t i = 0; i < t.size(); ++i) shifts[i] = {alpha * t[i][0], alpha * t[i][1]};
    return shift_and_add(gram.frames, shifts);
}

/**
 * Local maxima of a curve whose topographic prominence is at least
 * min_prominence_fraction * (max - min). Prominence of a peak is its height
 * above the higher of the two valley minima reached before a higher point
 * (or the curve end) on each side, so the result is invariant under affine
 * rescaling of the curve. Returned in ascending index order.
 */
inline std::vector<std::pair<int, double>> detect_peaks(const std::vector<double>& curve,
                                                        double min_prominence_fraction) {
    const int n = static_cast<int>(curve.size());
    if (n < 3) throw std::invalid_argument("detect_peaks: curve shorter than 3 samples");
    double lo = curve[0], hi = curve[0];
    for (double v : curve) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<std::pair<int, double>> peaks;
    if (hi == lo) return peaks;
    const double threshold = min_prominence_fraction * (hi - lo);

    int i = 1;
    while (i < n - 1) {
        if (curve[i] <= curve[i - 1]) {
            ++i;
            continue;
        }
        // climb a potential plateau
        int j = i;
        while (j + 1 < n && curve[j + 1] == curve[i]) ++j;
        if (j + 1 >= n || curve[j + 1] > curve[i]) {
            i = j + 1;
            continue;
        }
        const double h = curve[i];
        double left_base = h;
        for (int k = i - 1; k >= 0 && curve[k] <= h; --k) left_base = std::min(left_base, curve[k]);
        double right_base = h;
        for (int k = j + 1; k < n && curve[k] <= h; ++k) right_base = std::min(right_base, curve[k]);
        const double prominence = h - std::max(left_base, right_base);
        if (prominence >= threshold) peaks.emplace_back(i, prominence);
        i = j + 1;
    }
    return peaks;
}

/**
 * Scans trajectory scale factors: for every alpha on the grid, form the
 * shift-and-add composite and score it with the Brenner index. Peaks in
 * the curve mark hidden layers and their scale factors.
 */
inline ScaleScanResult scan_scale_factors(const Ptychogram& gram,
                                          const ScanTrajectory& trajectory, double alpha_min,
                                          double alpha_max, double alpha_step,
                                          double min_prominence_fraction = 0.15) {
    if (!(alpha_step > 0.0)) throw std::invalid_argument("scan_scale_factors: step must be > 0");
    if (!(alpha_max >= alpha_min))
        throw std::invalid_argument("scan_scale_factors: empty alpha range");
    gram.validate();

    ScaleScanResult result;
    const int count = static_cast<int>(std::floor((alpha_max - alpha_min) / alpha_step + 1e-9)) + 1;
    result.alphas.resize(count);
    for (int k = 0; k < count; ++k) result.alphas[k] = alpha_min + k * alpha_step;
    result.brenner.resize(count);

    const int h = gram.frames.front().height();
    const int w = gram.frames.front().width();
    const auto traj_px = detail::centered_trajectory_px(trajectory, gram.meta.pitch);

    // Moderate frame counts: hoist the per-frame FFTs out of the alpha loop
    // and do one inverse transform per alpha.
    const bool precompute = gram.frames.size() <= 256;
    std::vector<std::vector<cplx>> spectra;
    if (precompute) {
        spectra.resize(gram.frames.size());
        for (size_t i = 0; i < gram.frames.size(); ++i) {
            spectra[i].resize(static_cast<size_t>(h) * w);
            const auto& src = gram.frames[i].samples();
            for (size_t k = 0; k < src.size(); ++k) spectra[i][k] = cplx{src[k], 0.0};
            fft::forward_inplace(spectra[i], h, w);
        }
    }

    parallel_for(count, [&](int k) {
        const double alpha = result.alphas[k];
        if (!precompute) {
            result.brenner[k] = brenner_index(shift_and_add(gram, trajectory, alpha));
            return;
        }
        std::vector<cplx> acc(static_cast<size_t>(h) * w, cplx{0.0, 0.0});
        for (size_t i = 0; i < spectra.size(); ++i) {
            std::vector<cplx> term = spectra[i];
            detail::apply_shift_ramp(term, h, w, -alpha * traj_px[i][1], -alpha * traj_px[i][0]);
            for (size_t p = 0; p < acc.size(); ++p) acc[p] += term[p];
        }
        fft::inverse_inplace(acc, h, w);
        std::vector<double> composite(acc.size());
        const double inv_n = 1.0 / static_cast<double>(spectra.size());
        for (size_t p = 0; p < acc.size(); ++p) composite[p] = std::max(0.0, acc[p].real() * inv_n);
        result.brenner[k] = brenner_index_raw(composite, h, w);
    });

    // A layer peak can sit exactly at alpha = 0 (static scene). Back-shift
    // blur is symmetric in the scale factor around zero for a centered
    // trajectory, so when the scan starts at 0 the curve is mirror-padded to
    // let the boundary maximum register as a local peak.
    if (alpha_min == 0.0 && count >= 2) {
        std::vector<double> padded;
        padded.reserve(result.brenner.size() + 1);
        padded.push_back(result.brenner[1]);
        padded.insert(padded.end(), result.brenner.begin(), result.brenner.end());
        for (const auto& [idx, prom] : detect_peaks(padded, min_prominence_fraction))
            if (idx >= 1) result.peaks.emplace_back(result.alphas[idx - 1], prom);
    } else {
        for (const auto& [idx, prom] : detect_peaks(result.brenner, min_prominence_fraction))
            result.peaks.emplace_back(result.alphas[idx], prom);
    }
    return result;
}

/// Expands scan peaks into layer hypotheses with coarse per-frame shifts
/// alpha * centered trajectory (pixels).
inline std::vector<LayerHypothesis> hypotheses_from_scan(const ScaleScanResult& scan,
                                                         const ScanTrajectory& trajectory,
                                                         double pitch) {
    const auto t = detail::centered_trajectory_px(trajectory, pitch);
    std::vector<LayerHypothesis> hyps;
    for (const auto& [alpha, prominence] : scan.peaks) {
        LayerHypothesis hyp;
        hyp.alpha = alpha;
        hyp.shifts_px.resize(t.size());
        for (size_t i = 0; i < t.size(); ++i) hyp.shifts_px[i] = {alpha * t[i][0], alpha * t[i][1]};
        hyps.push_back(std::move(hyp));
    }
    return hyps;
}

/// Knobs of the iterative shift refinement.
struct RefineOptions {
    double clamp_px = 2.0;        // max correction per frame per pass
    double peak_floor = 0.05;     // normalized correlation floor
    double taper_fraction = 0.10; // cosine edge taper before correlation
    int upsample = 16;            // subpixel resolution 1/upsample px
};

/**
 * Iterative blind shift refinement. Each pass rebuilds a reference image
 * per layer by shift-and-add (after subtracting the other layers' current
 * reference estimates from every frame) and then re-registers every frame
 * against its layer reference with subpixel cross-correlation. Frames whose
 * normalized correlation peak falls below the floor keep their previous
 * shift and are counted as warnings.
 *
 * The layer-subtraction step is what keeps multi-layer registration
 * well-posed: without it every reference would see the superposition of
 * all layers.
 */
inline std::vector<LayerHypothesis> refine_shifts(const Ptychogram& gram,
                                                  std::vector<LayerHypothesis> hypotheses,
                                                  int passes,
                                                  const RefineOptions& options = {}) {
    if (hypotheses.empty()) throw std::invalid_argument("refine_shifts: no hypotheses");
    if (passes < 1) throw std::invalid_argument("refine_shifts: passes must be >= 1");
    gram.validate();
    const int n = static_cast<int>(gram.frames.size());
    const int layer_count = static_cast<int>(hypotheses.size());
    for (const auto& hyp : hypotheses)
        if (static_cast<int>(hyp.shifts_px.size()) != n)
            throw std::invalid_argument("refine_shifts: hypothesis shift table length mismatch");
    const int h = gram.frames.front().height();
    const int w = gram.frames.front().width();

    // The wall's static texture is identical in every frame and would pull
    // every cross-correlation toward zero lag; registration runs on the
    // deviations from the pixelwise mean frame.
    std::vector<std::vector<double>> moving(n);
    {
        std::vector<double> static_part(static_cast<size_t>(h) * w, 0.0);
        const double inv_n = 1.0 / n;
        for (const auto& frame : gram.frames)
            for (size_t k = 0; k < static_part.size(); ++k)
                static_part[k] += frame.samples()[k] * inv_n;
        for (int i = 0; i < n; ++i) {
            moving[i] = gram.frames[i].samples();
            for (size_t k = 0; k < static_part.size(); ++k) moving[i][k] -= static_part[k];
        }
    }

    auto residual_for = [&](int layer, int frame,
                            const std::vector<std::vector<double>>& refs,
                            const std::vector<LayerHypothesis>& hyps) {
        std::vector<double> res = moving[frame];
        for (int m = 0; m < layer_count; ++m) {
            if (m == layer) continue;
            const auto& s = hyps[m].shifts_px[frame];
            const std::vector<double> contrib = shift_real(refs[m], h, w, s[0], s[1]);
            for (size_t k = 0; k < res.size(); ++k) res[k] -= contrib[k];
        }
        return res;
    };

    auto build_reference = [&](const std::vector<std::array<double, 2>>& shifts) {
        std::vector<double> acc(static_cast<size_t>(h) * w, 0.0);
        for (int i = 0; i < n; ++i) {
            const std::vector<double> back = shift_real(moving[i], h, w, -shifts[i][0], -shifts[i][1]);
            for (size_t k = 0; k < acc.size(); ++k) acc[k] += back[k];
        }
        const double inv_n = 1.0 / n;
        for (double& v : acc) v *= inv_n;
        return acc;
    };

    // Bootstrap references by plain shift-and-add with the incoming shifts.
    std::vector<std::vector<double>> refs(layer_count);
    for (int l = 0; l < layer_count; ++l) refs[l] = build_reference(hypotheses[l].shifts_px);

    for (int pass = 0; pass < passes; ++pass) {
        const std::vector<LayerHypothesis> snapshot = hypotheses;

        // (a) rebuild references from residual frames
        if (layer_count > 1) {
            std::vector<std::vector<double>> next_refs(layer_count);
            for (int l = 0; l < layer_count; ++l) {
                std::vector<double> acc(static_cast<size_t>(h) * w, 0.0);
                for (int i = 0; i < n; ++i) {
                    std::vector<double> res = residual_for(l, i, refs, snapshot);
                    const auto& s = snapshot[l].shifts_px[i];
                    const std::vector<double> back = shift_real(res, h, w, -s[0], -s[1]);
                    for (size_t k = 0; k < acc.size(); ++k) acc[k] += back[k];
                }
                const double inv_n = 1.0 / n;
                for (double& v : acc) v *= inv_n;
                next_refs[l] = std::move(acc);
            }
            refs = std::move(next_refs);
        } else {
            refs[0] = build_reference(snapshot[0].shifts_px);
        }

        // (b) re-register every frame against its layer reference. The
        // correlation is incremental: the reference is first shifted to the
        // frame's current position so both inputs see the same apodization
        // window and only the small correction is estimated (window bias
        // cancels; the correction is clamped anyway).
        for (int l = 0; l < layer_count; ++l) {
            std::vector<std::array<double, 2>> updated(n);
            std::vector<uint8_t> warned(n, 0);
            parallel_for(n, [&](int i) {
                const auto& old = snapshot[l].shifts_px[i];
                const std::vector<double> res = residual_for(l, i, refs, snapshot);
                const std::vector<double> res_w =
                    detail::window_for_correlation(res, h, w, options.taper_fraction);
                const std::vector<double> placed = shift_real(refs[l], h, w, old[0], old[1]);
                const std::vector<double> tmpl_w =
                    detail::window_for_correlation(placed, h, w, options.taper_fraction);

                std::vector<cplx> cc(res_w.size());
                std::vector<cplx> tf(tmpl_w.size());
                for (size_t k = 0; k < res_w.size(); ++k) {
                    cc[k] = cplx{res_w[k], 0.0};
                    tf[k] = cplx{tmpl_w[k], 0.0};
                }
                fft::forward_inplace(cc, h, w);
                fft::forward_inplace(tf, h, w);
                for (size_t k = 0; k < cc.size(); ++k) cc[k] *= std::conj(tf[k]);

                std::vector<cplx> corr = cc;
                fft::inverse_inplace(corr, h, w);
                // the correction is bounded, so only lags near zero compete
                const int search = static_cast<int>(std::ceil(options.clamp_px)) + 1;
                int py = 0, px = 0;
                double pv = corr[0].real();
                for (int dy = -search; dy <= search; ++dy)
                    for (int dx = -search; dx <= search; ++dx) {
                        const int yy = (dy + h) % h;
                        const int xx = (dx + w) % w;
                        const double v = corr[static_cast<size_t>(yy) * w + xx].real();
                        if (v > pv) {
                            pv = v;
                            py = dy;
                            px = dx;
                        }
                    }
                double by = py, bx = px, bv = pv;
                if (options.upsample > 1)
                    detail::upsampled_peak(cc, h, w, py, px, 0.6, options.upsample, by, bx, bv);

                double res_norm = 0.0, tmpl_norm = 0.0;
                for (double v : res_w) res_norm += v * v;
                for (double v : tmpl_w) tmpl_norm += v * v;
                const double denom = std::sqrt(res_norm) * std::sqrt(tmpl_norm);
                const double normalized = denom > 0.0 ? bv / denom : 0.0;
                if (normalized < options.peak_floor) {
                    updated[i] = old;
                    warned[i] = 1;
                    return;
                }
                const double dx = std::clamp(bx, -options.clamp_px, options.clamp_px);
                const double dy = std::clamp(by, -options.clamp_px, options.clamp_px);
                updated[i] = {old[0] + dx, old[1] + dy};
            });

            double sq = 0.0;
            int warnings = 0;
            for (int i = 0; i < n; ++i) {
                const auto& old = snapshot[l].shifts_px[i];
                const double dx = updated[i][0] - old[0];
                const double dy = updated[i][1] - old[1];
                sq += dx * dx + dy * dy;
                warnings += warned[i];
            }
            hypotheses[l].shifts_px = std::move(updated);
            hypotheses[l].refinement_history.push_back(std::sqrt(sq / (2.0 * n)));
            hypotheses[l].correlation_warnings += warnings;
        }
    }
    return hypotheses;
}

} // namespace pnlos
