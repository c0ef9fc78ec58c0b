#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pnlos/field.hpp"
#include "pnlos/propagate.hpp"
#include "pnlos/random.hpp"
#include "pnlos/scene.hpp"
#include "pnlos/shift.hpp"

namespace pnlos {

/// Everything the tests need to check a synthetic acquisition against:
/// per-layer wall wavefields, object-plane fields, exact shift tables.
struct LayerGroundTruth {
    ComplexField wall_field;    // W_j on the wall grid
    ComplexField object_field;  // embedded reflectance at the object plane
    std::vector<std::array<double, 2>> shifts_m;
    std::vector<std::array<double, 2>> shifts_px;
    double depth = 0.0;
    double alpha = 0.0;
};

struct SimulationRecord {
    CodedSurface cs;
    std::vector<LayerGroundTruth> layers;
    uint64_t seed = 0;
};

namespace detail {

/// Pastes `small` into a zero canvas with its top-left corner at (y0, x0).
inline ComplexField embed_at(int canvas_h, int canvas_w, double pitch, double wavelength,
                             const ComplexField& small, int y0, int x0) {
    ComplexField canvas(canvas_h, canvas_w, pitch, wavelength);
    for (int y = 0; y < small.height(); ++y)
        for (int x = 0; x < small.width(); ++x) canvas.at(y0 + y, x0 + x) = small.at(y, x);
    return canvas;
}

} // namespace detail

/**
 * Embeds a layer's reflectance into the simulation grid. The object is
 * centered plus its lateral offset, and must land entirely inside the grid
 * minus a 25% guard band per side (wrap-around shifts and propagation halos
 * must not touch object content).
 */
inline ComplexField embed_reflectance(const ObjectLayer& layer, const AcquisitionMeta& meta,
                                      int grid_h, int grid_w) {
    layer.validate();
    meta.validate();
    const int oh = layer.reflectance.height();
    const int ow = layer.reflectance.width();
    const int off_x = static_cast<int>(std::round(layer.lateral_offset[0] / meta.pitch));
    const int off_y = static_cast<int>(std::round(layer.lateral_offset[1] / meta.pitch));
    const int y0 = (grid_h - oh) / 2 + off_y;
    const int x0 = (grid_w - ow) / 2 + off_x;
    const int guard_y = (grid_h + 3) / 4;
    const int guard_x = (grid_w + 3) / 4;
    if (y0 < guard_y || x0 < guard_x || y0 + oh > grid_h - guard_y || x0 + ow > grid_w - guard_x)
        throw std::invalid_argument(
            "embed_reflectance: object spans rows [" + std::to_string(y0) + ", " +
            std::to_string(y0 + oh) + ") cols [" + std::to_string(x0) + ", " +
            std::to_string(x0 + ow) + ") which exceeds the guard band [" +
            std::to_string(guard_y) + ", " + std::to_string(grid_h - guard_y) + ") x [" +
            std::to_string(guard_x) + ", " + std::to_string(grid_w - guard_x) + ")");
    return detail::embed_at(grid_h, grid_w, meta.pitch, meta.wavelength, layer.reflectance, y0,
                            x0);
}

/// The layer's reflected wavefield as it arrives at the wall plane:
/// the embedded reflectance propagated forward by the layer depth.
inline ComplexField object_to_wall(const ObjectLayer& layer, const AcquisitionMeta& meta,
                                   int grid_h, int grid_w) {
    return propagate(embed_reflectance(layer, meta, grid_h, grid_w), layer.depth);
}

/// Applies the acquisition noise model: Poisson shot noise at photon_scale
/// expected counts per unit intensity, additive Gaussian read noise, and
/// optional uniform quantization to 2^bit_depth levels of the frame range.
inline IntensityFrame apply_noise(const IntensityFrame& frame, const NoiseModel& noise,
                                  uint64_t seed) {
    if (!noise.enabled()) return frame;
    IntensityFrame out = frame;
    auto rng = make_rng(seed);
    auto& data = out.samples();
    if (noise.photon_scale > 0.0) {
        for (double& v : data) {
            std::poisson_distribution<long long> poisson(v * noise.photon_scale);
            v = static_cast<double>(poisson(rng)) / noise.photon_scale;
        }
    }
    if (noise.read_sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, noise.read_sigma);
        for (double& v : data) v = std::max(0.0, v + gauss(rng));
    }
    if (noise.bit_depth > 0) {
        double peak = 0.0;
        for (double v : data) peak = std::max(peak, v);
        if (peak > 0.0) {
            const double levels = std::pow(2.0, noise.bit_depth) - 1.0;
            const double step = peak / levels;
            for (double& v : data) v = std::round(v / step) * step;
        }
    }
    return out;
}

/**
 * Synthesizes a depth-multiplexed ptychogram: for every scan position the
 * frame is the incoherent sum over layers of
 * |propagate(shift(W_j) * CS, defocus)|^2, then the noise model is applied.
 * With noise disabled the output is the exact forward-model value.
 *
 * Noise RNG streams are derived from (seed, frame index) so regeneration is
 * bit-identical regardless of evaluation order.
 */
inline std::pair<Ptychogram, SimulationRecord> simulate_ptychogram(
    const std::vector<ObjectLayer>& layers, const CodedSurface& cs,
    const ScanTrajectory& trajectory, const AcquisitionMeta& meta, const Geometry& geometry,
    uint64_t seed) {
    trajectory.validate();
    meta.validate();
    if (layers.empty()) throw std::invalid_argument("simulate_ptychogram: no layers");
    const ComplexField& profile = cs.profile;
    if (profile.pitch() != meta.pitch || profile.wavelength() != meta.wavelength)
        throw std::invalid_argument(
            "simulate_ptychogram: coded surface grid disagrees with acquisition metadata");

    const int h = profile.height();
    const int w = profile.width();

    SimulationRecord record{cs, {}, seed};
    for (const ObjectLayer& layer : layers) {
        ComplexField embedded = embed_reflectance(layer, meta, h, w);
        LayerGroundTruth gt{propagate(embedded, layer.depth),
                            std::move(embedded),
                            layer_shift_model(trajectory, layer.depth, geometry),
                            {},
                            layer.depth,
                            geometry.alpha_for_depth(layer.depth)};
        gt.shifts_px.reserve(gt.shifts_m.size());
        for (const auto& s : gt.shifts_m)
            gt.shifts_px.push_back({s[0] / meta.pitch, s[1] / meta.pitch});
        record.layers.push_back(std::move(gt));
    }

    Ptychogram gram;
    gram.trajectory = trajectory;
    gram.meta = meta;
    gram.frames.reserve(trajectory.count());
    for (size_t i = 0; i < trajectory.count(); ++i) {
        IntensityFrame acc(h, w, meta.pitch);
        for (const LayerGroundTruth& gt : record.layers) {
            const auto& s = gt.shifts_px[i];
            ComplexField shifted = shift_field(gt.wall_field, s[0], s[1]);
            auto& sd = shifted.samples();
            const auto& cd = profile.samples();
            for (size_t k = 0; k < sd.size(); ++k) sd[k] *= cd[k];
            const ComplexField at_sensor = propagate(shifted, meta.defocus_d);
            auto& av = acc.samples();
            const auto& fv = at_sensor.samples();
            for (size_t k = 0; k < av.size(); ++k) av[k] += std::norm(fv[k]);
        }
        gram.frames.push_back(meta.noise.enabled()
                                  ? apply_noise(acc, meta.noise, derive_seed(seed, i))
                                  : std::move(acc));
    }
    return {std::move(gram), std::move(record)};
}

} // namespace pnlos
