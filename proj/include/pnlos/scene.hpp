#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pnlos/field.hpp"

namespace pnlos {

/// One hidden-object layer: its complex reflectance sampled at the layer's
/// own plane, the distance from the wall, and the lateral placement of the
/// layer center relative to the grid center.
struct ObjectLayer {
    ComplexField reflectance;
    double depth = 0.0;                      // meters from the wall, > 0
    std::array<double, 2> lateral_offset{};  // meters, (x, y)

    void validate() const {
        if (!(depth > 0.0)) throw std::invalid_argument("ObjectLayer: depth must be positive");
        reflectance.require_finite("ObjectLayer.reflectance");
        for (const cplx& v : reflectance.samples())
            if (std::abs(v) > 1.0 + 1e-12)
                throw std::invalid_argument(
                    "ObjectLayer: reflectance modulus exceeds 1 (passive reflector)");
    }
};

/// Ordered scan positions of the virtual light source on the wall, meters.
struct ScanTrajectory {
    std::vector<std::array<double, 2>> positions;  // (sx, sy)
    int rows = 0;  // grid descriptor when the trajectory is a regular raster
    int cols = 0;
    double extent_x = 0.0;
    double extent_y = 0.0;

    /// Centered raster covering extent_x by extent_y meters, row-major order.
    static ScanTrajectory raster(int rows, int cols, double extent_x, double extent_y) {
        if (rows < 1 || cols < 1 || rows * cols < 2)
            throw std::invalid_argument("ScanTrajectory: need at least 2 positions");
        ScanTrajectory t;
        t.rows = rows;
        t.cols = cols;
        t.extent_x = extent_x;
        t.extent_y = extent_y;
        t.positions.reserve(static_cast<size_t>(rows) * cols);
        for (int r = 0; r < rows; ++r) {
            const double sy = rows > 1 ? (-0.5 + static_cast<double>(r) / (rows - 1)) * extent_y : 0.0;
            for (int c = 0; c < cols; ++c) {
                const double sx =
                    cols > 1 ? (-0.5 + static_cast<double>(c) / (cols - 1)) * extent_x : 0.0;
                t.positions.push_back({sx, sy});
            }
        }
        return t;
    }

    size_t count() const { return positions.size(); }

    std::array<double, 2> centroid() const {
        double sx = 0.0, sy = 0.0;
        for (const auto& p : positions) {
            sx += p[0];
            sy += p[1];
        }
        const double n = static_cast<double>(positions.size());
        return {sx / n, sy / n};
    }

    void validate() const {
        if (positions.size() < 2)
            throw std::invalid_argument("ScanTrajectory: need at least 2 positions");
        bool distinct = false;
        for (const auto& p : positions) {
            if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
                throw std::invalid_argument("ScanTrajectory: non-finite position");
            if (p[0] != positions[0][0] || p[1] != positions[0][1]) distinct = true;
        }
        if (!distinct) throw std::invalid_argument("ScanTrajectory: all positions coincide");
    }
};

/// The wall's complex modulation profile plus the parameters it was
/// synthesized from.
struct CodedSurface {
    ComplexField profile{2, 2, 1.0, 1.0};  // placeholder grid until synthesized
    struct Provenance {
        uint64_t seed = 0;
        double correlation_length = 0.0;
        double amp_lo = 1.0;
        double amp_hi = 1.0;
        double phase_range = 0.0;
    } provenance;
};

/// Sensor noise model. photon_scale is the expected count at unit
/// intensity (0 disables shot noise); read_sigma is additive Gaussian noise
/// in intensity units; bit_depth 0 means no quantization.
struct NoiseModel {
    double photon_scale = 0.0;
    double read_sigma = 0.0;
    int bit_depth = 0;

    bool enabled() const { return photon_scale > 0.0 || read_sigma > 0.0 || bit_depth > 0; }
};

/// Per-acquisition optics constants: the defocus between the wall's
/// modulation plane and the detection plane must be strictly positive, the
/// defocus is what converts phase into measurable intensity.
struct AcquisitionMeta {
    double defocus_d = 0.0;
    double wavelength = 0.0;
    double pitch = 0.0;
    NoiseModel noise;

    void validate() const {
        if (!(defocus_d > 0.0))
            throw std::invalid_argument("AcquisitionMeta: defocus_d must be positive");
        if (!(wavelength > 0.0) || !(pitch > 0.0))
            throw std::invalid_argument("AcquisitionMeta: wavelength and pitch must be positive");
    }
};

/// The acquired stack: one intensity frame per trajectory position.
struct Ptychogram {
    std::vector<IntensityFrame> frames;
    ScanTrajectory trajectory;
    AcquisitionMeta meta;

    void validate() const {
        trajectory.validate();
        meta.validate();
        if (frames.size() != trajectory.count())
            throw std::invalid_argument("Ptychogram: frame count differs from trajectory length");
        for (const auto& f : frames)
            if (!f.same_grid(frames.front()))
                throw std::invalid_argument("Ptychogram: frames disagree on shape or pitch");
    }
};

/// Shift-scaling geometry: a layer at depth z translates on the wall by
/// alpha(z) = kappa * z_ref / z times the centered trajectory.
struct Geometry {
    double kappa = 0.25;
    double z_ref = 0.4;

    double alpha_for_depth(double depth) const {
        if (!(depth > 0.0)) throw std::invalid_argument("Geometry: depth must be positive");
        return kappa * z_ref / depth;
    }

    double depth_for_alpha(double alpha) const {
        if (!(alpha > 0.0)) throw std::invalid_argument("Geometry: alpha must be positive");
        return kappa * z_ref / alpha;
    }
};

/**
 * Per-frame wall-plane shifts of one layer: a pure linear scaling of the
 * centered trajectory, shifts_i = alpha(depth) * (s_i - centroid), meters.
 */
inline std::vector<std::array<double, 2>> layer_shift_model(const ScanTrajectory& trajectory,
                                                            double depth,
                                                            const Geometry& geometry) {
    const double alpha = geometry.alpha_for_depth(depth);
    const auto c = trajectory.centroid();
    std::vector<std::array<double, 2>> shifts;
    shifts.reserve(trajectory.count());
    for (const auto& p : trajectory.positions)
        shifts.push_back({alpha * (p[0] - c[0]), alpha * (p[1] - c[1])});
    return shifts;
}

} // namespace pnlos
