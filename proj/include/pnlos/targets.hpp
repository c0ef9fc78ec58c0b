#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pnlos/coded_surface.hpp"
#include "pnlos/errors.hpp"
#include "pnlos/field.hpp"
#include "pnlos/random.hpp"

namespace pnlos {

/// Parameters for the test-target generators. Only the fields relevant to
/// the chosen kind are read.
struct TargetParams {
    double pitch = 8e-6;
    double wavelength = 532e-9;
    double amplitude = 1.0;  // reflectance amplitude of the "ink", <= 1
    int margin = 4;          // blank border, pixels

    std::vector<double> linewidths;  // usaf_bars: one three-bar group per entry, meters
    bool horizontal = false;         // usaf_bars: bar orientation

    std::string text;    // text: A-Z, 0-9 and spaces
    int text_scale = 8;  // text: pixels per font cell

    std::string file;  // image_file: PGM path

    int height = 32;  // blank
    int width = 32;
};

namespace detail {

// 5x7 bitmap font, one row per byte, 5 LSBs used, MSB is the left column.
inline const uint8_t* glyph_5x7(char c) {
    static const uint8_t table[37][7] = {
        {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, // A
        {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}, // B
        {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, // C
        {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}, // D
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, // E
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}, // F
        {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, // G
        {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, // H
        {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, // I
        {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}, // J
        {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, // K
        {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}, // L
        {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, // M
        {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}, // N
        {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, // O
        {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}, // P
        {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, // Q
        {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}, // R
        {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, // S
        {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}, // T
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, // U
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}, // V
        {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, // W
        {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}, // X
        {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}, // Y
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}, // Z
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, // 0
        {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}, // 1
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, // 2
        {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}, // 3
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, // 4
        {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}, // 5
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, // 6
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}, // 7
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, // 8
        {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}, // 9
        {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}, // space / unknown
    };
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u >= 'A' && u <= 'Z') return table[u - 'A'];
    if (u >= '0' && u <= '9') return table[26 + (u - '0')];
    return table[36];
}

inline ComplexField from_mask(const std::vector<double>& mask, int h, int w,
                              const TargetParams& p) {
    const int hh = std::max(2, h + 2 * p.margin);
    const int ww = std::max(2, w + 2 * p.margin);
    ComplexField field(hh, ww, p.pitch, p.wavelength);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            field.at(y + p.margin, x + p.margin) =
                cplx{mask[static_cast<size_t>(y) * w + x] * p.amplitude, 0.0};
    return field;
}

inline ComplexField make_usaf_bars(const TargetParams& p) {
    if (p.linewidths.empty()) {
        std::vector<double> zeros(static_cast<size_t>(p.height) * p.width, 0.0);
        return from_mask(zeros, p.height, p.width, p);
    }
    std::vector<int> widths_px;
    int total_h = 0, total_w = 0;
    for (size_t g = 0; g < p.linewidths.size(); ++g) {
        const int wpx = std::max(1, static_cast<int>(std::round(p.linewidths[g] / p.pitch)));
        widths_px.push_back(wpx);
        total_h += 5 * wpx;
        if (g > 0) total_h += std::max(4, std::max(wpx, widths_px[g - 1]));
        total_w = std::max(total_w, 5 * wpx);
    }
    std::vector<double> mask(static_cast<size_t>(total_h) * total_w, 0.0);
    int y = 0;
    for (size_t g = 0; g < widths_px.size(); ++g) {
        const int wpx = widths_px[g];
        if (g > 0) y += std::max(4, std::max(wpx, widths_px[g - 1]));
        // three vertical bars of width wpx separated by gaps of width wpx
        for (int bar = 0; bar < 3; ++bar) {
            const int x0 = bar * 2 * wpx;
            for (int yy = y; yy < y + 5 * wpx; ++yy)
                for (int xx = x0; xx < x0 + wpx; ++xx)
                    mask[static_cast<size_t>(yy) * total_w + xx] = 1.0;
        }
        y += 5 * wpx;
    }
    if (p.horizontal) {
        std::vector<double> t(mask.size());
        for (int yy = 0; yy < total_h; ++yy)
            for (int xx = 0; xx < total_w; ++xx)
                t[static_cast<size_t>(xx) * total_h + yy] =
                    mask[static_cast<size_t>(yy) * total_w + xx];
        return from_mask(t, total_w, total_h, p);
    }
    return from_mask(mask, total_h, total_w, p);
}

inline ComplexField make_text(const TargetParams& p) {
    if (p.text.empty()) {
        std::vector<double> zeros(static_cast<size_t>(p.height) * p.width, 0.0);
        return from_mask(zeros, p.height, p.width, p);
    }
    const int s = std::max(1, p.text_scale);
    const int n = static_cast<int>(p.text.size());
    const int w = n * 5 * s + (n - 1) * s;
    const int h = 7 * s;
    std::vector<double> mask(static_cast<size_t>(h) * w, 0.0);
    for (int ci = 0; ci < n; ++ci) {
        const uint8_t* glyph = glyph_5x7(p.text[ci]);
        const int gx0 = ci * 6 * s;
        for (int row = 0; row < 7; ++row)
            for (int col = 0; col < 5; ++col) {
                if (!(glyph[row] & (0x10 >> col))) continue;
                for (int yy = row * s; yy < (row + 1) * s; ++yy)
                    for (int xx = gx0 + col * s; xx < gx0 + (col + 1) * s; ++xx)
                        mask[static_cast<size_t>(yy) * w + xx] = 1.0;
            }
    }
    return from_mask(mask, h, w, p);
}

inline ComplexField make_from_image(const TargetParams& p) {
    std::ifstream in(p.file, std::ios::binary);
    if (!in) throw DataError("make_test_target: cannot open image file '" + p.file + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2")
        throw DataError("make_test_target: '" + p.file + "' is not a P2/P5 PGM image");
    auto next_token = [&in, &p]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw DataError("make_test_target: truncated PGM header in '" + p.file + "'");
    };
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw DataError("make_test_target: bad PGM dimensions in '" + p.file + "'");
    std::vector<double> mask(static_cast<size_t>(h) * w);
    if (magic == "P5") {
        in.get();  // single whitespace after maxval
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(mask.size() * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size()))
            throw DataError("make_test_target: truncated PGM pixel data in '" + p.file + "'");
        for (size_t i = 0; i < mask.size(); ++i) {
            const int v = bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
            mask[i] = static_cast<double>(v) / maxval;
        }
    } else {
        for (size_t i = 0; i < mask.size(); ++i) {
            int v;
            if (!(in >> v)) throw DataError("make_test_target: truncated P2 data in '" + p.file + "'");
            mask[i] = static_cast<double>(v) / maxval;
        }
    }
    return from_mask(mask, h, w, p);
}

} // namespace detail

/**
 * Deterministic binary-amplitude reflectance fixtures: "usaf_bars" renders
 * three-bar groups (one per requested linewidth), "text" rasterizes a
 * string with a 5x7 font, "image_file" loads a grayscale PGM normalized to
 * [0, 1], "blank" is an all-zeros field.
 */
inline ComplexField make_test_target(const std::string& kind, const TargetParams& params) {
    if (!(params.amplitude > 0.0) || params.amplitude > 1.0)
        throw std::invalid_argument("make_test_target: amplitude must be in (0, 1]");
    if (kind == "usaf_bars") return detail::make_usaf_bars(params);
    if (kind == "text") return detail::make_text(params);
    if (kind == "image_file") return detail::make_from_image(params);
    if (kind == "blank") {
        std::vector<double> zeros(static_cast<size_t>(params.height) * params.width, 0.0);
        return detail::from_mask(zeros, params.height, params.width, params);
    }
    throw std::invalid_argument("make_test_target: unknown kind '" + kind + "'");
}

/**
 * Imprints a deterministic pseudo-random phase texture on a reflectance
 * field, modeling an optically rough surface. The modulus is untouched, so
 * a binary-amplitude target stays binary; the scattered wavefield at the
 * wall gains the speckle structure that the shift recovery locks onto.
 * phase_range is the peak-to-peak phase excursion in radians,
 * correlation_px the texture grain in pixels.
 */
inline ComplexField roughen_surface(const ComplexField& field, double phase_range,
                                    double correlation_px, uint64_t seed) {
    if (phase_range < 0.0)
        throw std::invalid_argument("roughen_surface: phase_range must be >= 0");
    if (phase_range == 0.0) return field;
    auto rng = make_rng(derive_seed(seed, 0x524F5547));
    const auto u = detail::correlated_uniform(field.height(), field.width(), 1.0,
                                              std::max(1.0, correlation_px), rng);
    ComplexField out = field;
    for (size_t k = 0; k < out.size(); ++k) {
        const double phase = phase_range * (u[k] - 0.5);
        out.samples()[k] *= cplx{std::cos(phase), std::sin(phase)};
    }
    return out;
}

} // namespace pnlos
