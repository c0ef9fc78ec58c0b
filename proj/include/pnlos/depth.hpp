#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pnlos/field.hpp"
#include "pnlos/metrics.hpp"
#include "pnlos/parallel.hpp"
#include "pnlos/propagate.hpp"
#include "pnlos/recon.hpp"
#include "pnlos/scene.hpp"
#include "pnlos/shift_recovery.hpp"
#include "pnlos/simulate.hpp"

namespace pnlos {

/// Rectangular tiling of a field into rows x cols segments, optionally
/// expanded by an overlap fraction of the base tile on each interior side.
struct SegmentGrid {
    int rows = 3;
    int cols = 6;
    double overlap = 0.2;

    struct Rect {
        int y0, y1, x0, x1;
    };

    void validate() const {
        if (rows < 1 || cols < 1) throw std::invalid_argument("SegmentGrid: need >= 1 segment");
        if (!(overlap >= 0.0 && overlap < 0.5))
            throw std::invalid_argument("SegmentGrid: overlap must lie in [0, 0.5)");
    }

    int count() const { return rows * cols; }

    /// Core tile (no overlap); cores partition the field.
    Rect core(int r, int c, int h, int w) const {
        auto edge = [](int k, int n, int extent) {
            return static_cast<int>(std::llround(static_cast<double>(k) * extent / n));
        };
        return Rect{edge(r, rows, h), edge(r + 1, rows, h), edge(c, cols, w), edge(c + 1, cols, w)};
    }

    /// Core expanded by the overlap margin, clipped to the field.
    Rect cell(int r, int c, int h, int w) const {
        Rect b = core(r, c, h, w);
        const int oy = static_cast<int>(std::floor(overlap * static_cast<double>(h) / rows));
        const int ox = static_cast<int>(std::floor(overlap * static_cast<double>(w) / cols));
        return Rect{std::max(0, b.y0 - oy), std::min(h, b.y1 + oy), std::max(0, b.x0 - ox),
                    std::min(w, b.x1 + ox)};
    }
};

/// Brenner-vs-depth curves per segment with interpolated best-focus depths.
/// Segments whose curve is flat carry no best depth (nullopt).
struct DepthSweepResult {
    std::vector<double> depths;
    std::vector<std::vector<double>> brenner;  // [segment][depth index]
    std::vector<std::optional<double>> best_depth;
};

/**
 * Refocuses the wavefield through a depth range and scores every segment's
 * crop with the Brenner index. Best depth per segment is the curve argmax
 * refined by a quadratic fit through its neighbors, clamped to the sampled
 * range.
 */
inline DepthSweepResult refocus_sweep(const ComplexField& wall_field, const SegmentGrid& segments,
                                      double z_min, double z_max, double z_step) {
    segments.validate();
    if (!(z_min < z_max) || !(z_step > 0.0))
        throw std::invalid_argument("refocus_sweep: need z_min < z_max and z_step > 0");

    DepthSweepResult result;
    const int count = static_cast<int>(std::floor((z_max - z_min) / z_step + 1e-9)) + 1;
    result.depths.resize(count);
    for (int k = 0; k < count; ++k) result.depths[k] = z_min + k * z_step;

    const int h = wall_field.height();
    const int w = wall_field.width();
    result.brenner.assign(segments.count(), std::vector<double>(count, 0.0));

    // Restrict the wavefield once to the band shared by every depth in the
    // sweep. The anti-aliasing band limit widens at shorter distances, so
    // without this a band-filling (rough-surface) field scores ever higher
    // Brenner contrast toward the near end regardless of focus.
    ComplexField common_band = wall_field;
    {
        const double z_far = std::max(std::abs(z_min), std::abs(z_max));
        const PropagationKernel far_kernel = PropagationKernel::make(
            h, w, wall_field.pitch(), wall_field.wavelength(), z_far);
        auto& data = common_band.samples();
        fft::forward_inplace(data, h, w);
        for (size_t i = 0; i < data.size(); ++i)
            if (!far_kernel.mask[i]) data[i] = cplx{0.0, 0.0};
        fft::inverse_inplace(data, h, w);
    }

    parallel_for(count, [&](int k) {
        const ComplexField at_depth = propagate(common_band, -result.depths[k]);
        std::vector<double> img(at_depth.size());
        for (size_t i = 0; i < img.size(); ++i) img[i] = std::norm(at_depth.samples()[i]);
        for (int r = 0; r < segments.rows; ++r)
            for (int c = 0; c < segments.cols; ++c) {
                const auto rect = segments.cell(r, c, h, w);
                result.brenner[r * segments.cols + c][k] =
                    brenner_index_crop(img, h, w, rect.y0, rect.y1, rect.x0, rect.x1);
            }
    });

    result.best_depth.resize(segments.count());
    for (int s = 0; s < segments.count(); ++s) {
        const auto& curve = result.brenner[s];
        int arg = 0;
        double lo = curve[0], hi = curve[0];
        for (int k = 0; k < count; ++k) {
            if (curve[k] > curve[arg]) arg = k;
            lo = std::min(lo, curve[k]);
            hi = std::max(hi, curve[k]);
        }
        if (hi <= 0.0 || hi - lo <= 1e-12 * hi) {
            result.best_depth[s] = std::nullopt;
            continue;
        }
        double best = result.depths[arg];
        if (arg > 0 && arg < count - 1) {
            const double ym = curve[arg - 1], y0 = curve[arg], yp = curve[arg + 1];
            const double denom = ym - 2.0 * y0 + yp;
            if (denom < 0.0) {
                const double offset = 0.5 * (ym - yp) / denom;
                best += std::clamp(offset, -1.0, 1.0) * z_step;
            }
        }
        result.best_depth[s] = std::clamp(best, z_min, z_max);
    }
    return result;
}

/// Feather length in pixels along one axis (the overlap margin).
inline double overlap_margin(const SegmentGrid& segments, int extent, bool vertical) {
    const int n = vertical ? segments.rows : segments.cols;
    return std::floor(segments.overlap * static_cast<double>(extent) / n);
}

/// All-in-focus composite plus the per-segment and per-pixel depth maps.
struct DepthMap {
    std::vector<double> segment_depth;  // after neighbor fill, meters
    IntensityFrame all_in_focus;
    std::vector<double> depth_raster;  // per pixel, meters
    int undefined_filled = 0;
};

/**
 * Composites every segment's refocus at its own best depth, blending
 * overlaps with linear feathering. Segments without a defined best depth
 * are filled from the nearest defined segment and counted.
 */
inline DepthMap compose_all_in_focus(const ComplexField& wall_field,
                                     const DepthSweepResult& sweep, const SegmentGrid& segments) {
    segments.validate();
    if (static_cast<int>(sweep.best_depth.size()) != segments.count())
        throw std::invalid_argument("compose_all_in_focus: sweep/segment grid mismatch");
    const int h = wall_field.height();
    const int w = wall_field.width();

    DepthMap map{std::vector<double>(segments.count(), 0.0), IntensityFrame(h, w, wall_field.pitch()),
                 std::vector<double>(static_cast<size_t>(h) * w, 0.0), 0};

    // resolve undefined segments from the nearest defined neighbor
    std::vector<std::pair<double, double>> centers(segments.count());
    for (int r = 0; r < segments.rows; ++r)
        for (int c = 0; c < segments.cols; ++c) {
            const auto rect = segments.core(r, c, h, w);
            centers[r * segments.cols + c] = {0.5 * (rect.y0 + rect.y1), 0.5 * (rect.x0 + rect.x1)};
        }
    bool any_defined = false;
    for (const auto& d : sweep.best_depth) any_defined |= d.has_value();
    if (!any_defined)
        throw std::invalid_argument("compose_all_in_focus: no segment has a defined best depth");
    for (int s = 0; s < segments.count(); ++s) {
        if (sweep.best_depth[s]) {
            map.segment_depth[s] = *sweep.best_depth[s];
            continue;
        }
        ++map.undefined_filled;
        double best_dist = 0.0;
        int best = -1;
        for (int t = 0; t < segments.count(); ++t) {
            if (!sweep.best_depth[t]) continue;
            const double dy = centers[s].first - centers[t].first;
            const double dx = centers[s].second - centers[t].second;
            const double dist = dy * dy + dx * dx;
            if (best < 0 || dist < best_dist) {
                best = t;
                best_dist = dist;
            }
        }
        map.segment_depth[s] = *sweep.best_depth[best];
    }

    std::vector<double> weight(static_cast<size_t>(h) * w, 0.0);
    std::vector<double> value(static_cast<size_t>(h) * w, 0.0);
    for (int r = 0; r < segments.rows; ++r)
        for (int c = 0; c < segments.cols; ++c) {
            const int s = r * segments.cols + c;
            const ComplexField refocus = propagate(wall_field, -map.segment_depth[s]);
            const auto rect = segments.cell(r, c, h, w);
            const int fy = static_cast<int>(std::floor(overlap_margin(segments, h, true)));
            const int fx = static_cast<int>(std::floor(overlap_margin(segments, w, false)));
            for (int y = rect.y0; y < rect.y1; ++y) {
                double wy = 1.0;
                if (fy > 0) {
                    if (rect.y0 > 0) wy = std::min(wy, (y - rect.y0 + 0.5) / fy);
                    if (rect.y1 < h) wy = std::min(wy, (rect.y1 - y - 0.5) / fy);
                }
                for (int x = rect.x0; x < rect.x1; ++x) {
                    double wx = 1.0;
                    if (fx > 0) {
                        if (rect.x0 > 0) wx = std::min(wx, (x - rect.x0 + 0.5) / fx);
                        if (rect.x1 < w) wx = std::min(wx, (rect.x1 - x - 0.5) / fx);
                    }
                    const double wt = std::max(1e-6, wy * wx);
                    const size_t i = static_cast<size_t>(y) * w + x;
                    weight[i] += wt;
                    value[i] += wt * std::norm(refocus.samples()[i]);
                }
            }
        }
    for (size_t i = 0; i < weight.size(); ++i) map.all_in_focus.samples()[i] = value[i] / weight[i];

    // per-pixel depth by bilinear interpolation across segment centers
    auto axis_locate = [](double coord, const std::vector<double>& nodes, int& lo, double& t) {
        const int n = static_cast<int>(nodes.size());
        if (coord <= nodes.front()) {
            lo = 0;
            t = 0.0;
            return;
        }
        if (coord >= nodes.back()) {
            lo = n - 2 >= 0 ? n - 2 : 0;
            t = n >= 2 ? 1.0 : 0.0;
            return;
        }
        for (int k = 0; k + 1 < n; ++k)
            if (coord <= nodes[k + 1]) {
                lo = k;
                t = (coord - nodes[k]) / (nodes[k + 1] - nodes[k]);
                return;
            }
        lo = n >= 2 ? n - 2 : 0;
        t = 1.0;
    };
    std::vector<double> cy(segments.rows), cx(segments.cols);
    for (int r = 0; r < segments.rows; ++r) cy[r] = centers[r * segments.cols].first;
    for (int c = 0; c < segments.cols; ++c) cx[c] = centers[c].second;
    for (int y = 0; y < h; ++y) {
        int ry = 0;
        double ty = 0.0;
        if (segments.rows > 1) axis_locate(y, cy, ry, ty);
        for (int x = 0; x < w; ++x) {
            int rx = 0;
            double tx = 0.0;
            if (segments.cols > 1) axis_locate(x, cx, rx, tx);
            const int r1 = std::min(ry + 1, segments.rows - 1);
            const int c1 = std::min(rx + 1, segments.cols - 1);
            const double d00 = map.segment_depth[ry * segments.cols + rx];
            const double d01 = map.segment_depth[ry * segments.cols + c1];
            const double d10 = map.segment_depth[r1 * segments.cols + rx];
            const double d11 = map.segment_depth[r1 * segments.cols + c1];
            map.depth_raster[static_cast<size_t>(y) * w + x] =
                (1.0 - ty) * ((1.0 - tx) * d00 + tx * d01) + ty * ((1.0 - tx) * d10 + tx * d11);
        }
    }
    return map;
}

/// One two-layer scene instance of the depth-resolution protocol.
struct CrosstalkScene {
    std::vector<ObjectLayer> layers;  // layers[0] fixed, layers[1] moved by delta z
    CodedSurface cs;
    ScanTrajectory trajectory;
    AcquisitionMeta meta;
    Geometry geometry;
    uint64_t seed = 0;
};

/// Recovery-pipeline knobs used by the protocol runs.
struct CrosstalkPipelineConfig {
    double alpha_min = 0.0;
    double alpha_max = 1.2;
    double alpha_step = 0.01;
    double prominence_fraction = 0.15;
    int refine_passes = 2;
    ReconConfig recon;
    int mask_dilation_px = 2;
};

struct CrosstalkReport {
    std::vector<double> delta_z;
    std::vector<double> residual_contrast;  // NaN for failed runs
    std::optional<double> resolved_delta_z;
    bool partial = false;
    std::vector<std::string> failures;
};

namespace detail {

inline std::vector<uint8_t> support_mask(const ComplexField& field, int dilation) {
    const int h = field.height();
    const int w = field.width();
    std::vector<uint8_t> mask(field.size(), 0);
    for (size_t i = 0; i < field.size(); ++i) mask[i] = std::abs(field.samples()[i]) > 1e-12;
    for (int pass = 0; pass < dilation; ++pass) {
        std::vector<uint8_t> grown = mask;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (mask[static_cast<size_t>(y) * w + x]) continue;
                for (int dy = -1; dy <= 1 && !grown[static_cast<size_t>(y) * w + x]; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
                        if (mask[static_cast<size_t>(yy) * w + xx]) {
                            grown[static_cast<size_t>(y) * w + x] = 1;
                            break;
                        }
                    }
            }
        mask = std::move(grown);
    }
    return mask;
}

inline double rms_in_mask(const std::vector<double>& img, const std::vector<uint8_t>& mask) {
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < img.size(); ++i) {
        if (!mask[i]) continue;
        acc += img[i] * img[i];
        ++n;
    }
    return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

} // namespace detail

/**
 * Depth-resolution protocol: for every requested layer gap, simulates the
 * two-layer scene, runs the full blind pipeline (scale scan, shift
 * refinement, reconstruction), reconstructs the fixed layer and measures
 * the residual contrast, i.e. the RMS of the reconstruction inside the
 * moved layer's support (where the fixed layer has none) relative to the
 * RMS inside the fixed layer's own support. The resolved separation is the
 * first gap at which the contrast drops to half its value at the smallest
 * measured gap.
 */
inline CrosstalkReport residual_contrast_curve(
    const std::function<CrosstalkScene(double)>& scene_builder, const std::vector<double>& delta_z,
    const CrosstalkPipelineConfig& config) {
    if (delta_z.size() < 3)
        throw std::invalid_argument("residual_contrast_curve: need at least 3 delta_z values");
    for (size_t i = 1; i < delta_z.size(); ++i)
        if (!(delta_z[i] > delta_z[i - 1]))
            throw std::invalid_argument("residual_contrast_curve: delta_z must be increasing");

    CrosstalkReport report;
    report.delta_z = delta_z;
    report.residual_contrast.assign(delta_z.size(), std::numeric_limits<double>::quiet_NaN());

    for (size_t i = 0; i < delta_z.size(); ++i) {
        try {
            const CrosstalkScene scene = scene_builder(delta_z[i]);
            if (scene.layers.size() != 2)
                throw std::invalid_argument("crosstalk scene must have exactly 2 layers");
            auto [gram, record] = simulate_ptychogram(scene.layers, scene.cs, scene.trajectory,
                                                      scene.meta, scene.geometry, scene.seed);
            const ScaleScanResult scan =
                scan_scale_factors(gram, scene.trajectory, config.alpha_min, config.alpha_max,
                                   config.alpha_step, config.prominence_fraction);
            if (scan.peaks.empty()) throw NumericalError("no layer detected in scale scan");
            std::vector<LayerHypothesis> hyps =
                hypotheses_from_scan(scan, scene.trajectory, scene.meta.pitch);
            hyps = refine_shifts(gram, std::move(hyps), config.refine_passes);
            auto [state, convergence] = run_reconstruction(gram, hyps, config.recon);

            // the hypothesis nearest the fixed layer's true scale factor
            const double alpha_fixed = record.layers[0].alpha;
            size_t pick = 0;
            for (size_t k = 1; k < state.layers.size(); ++k)
                if (std::abs(state.layers[k].hypothesis.alpha - alpha_fixed) <
                    std::abs(state.layers[pick].hypothesis.alpha - alpha_fixed))
                    pick = k;
            const double depth =
                scene.geometry.depth_for_alpha(state.layers[pick].hypothesis.alpha);
            const ComplexField object = recover_object(state.layers[pick].wavefield, depth,
                                                       config.recon.tv_weight,
                                                       config.recon.tv_inner_steps);

            const auto sup1 =
                detail::support_mask(record.layers[0].object_field, config.mask_dilation_px);
            const auto sup2 =
                detail::support_mask(record.layers[1].object_field, config.mask_dilation_px);
            std::vector<uint8_t> only2(sup2.size());
            for (size_t k = 0; k < sup2.size(); ++k) only2[k] = sup2[k] && !sup1[k];

            std::vector<double> modulus(object.size());
            for (size_t k = 0; k < modulus.size(); ++k) modulus[k] = std::abs(object.samples()[k]);
            const double inside = detail::rms_in_mask(modulus, sup1);
            const double leak = detail::rms_in_mask(modulus, only2);
            if (inside <= 0.0) throw NumericalError("fixed-layer reconstruction is empty");
            report.residual_contrast[i] = leak / inside;
        } catch (const std::exception& e) {
            report.partial = true;
            report.failures.push_back("delta_z " + std::to_string(delta_z[i]) + ": " + e.what());
        }
    }

    double baseline = std::numeric_limits<double>::quiet_NaN();
    for (size_t i = 0; i < delta_z.size(); ++i) {
        const double contrast = report.residual_contrast[i];
        if (std::isnan(contrast)) continue;
        if (std::isnan(baseline)) {
            baseline = contrast;  // smallest measured gap sets the baseline
            continue;
        }
        if (contrast <= 0.5 * baseline) {
            report.resolved_delta_z = delta_z[i];
            break;
        }
    }
    return report;
}

} // namespace pnlos
