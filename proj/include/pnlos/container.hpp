#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pnlos/errors.hpp"
#include "pnlos/field.hpp"
#include "pnlos/scene.hpp"
#include "pnlos/shift_recovery.hpp"

namespace pnlos {

/// Shortest round-trippable decimal form of a double.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// key = value lines; repeated keys collect in order. '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_kv(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in(text);
    std::string line;
    auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        const size_t a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        const size_t b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) entries.emplace_back(key, value);
    }
    return entries;
}

} // namespace detail

/**
 * On-disk ptychogram container: a human-readable manifest next to a single
 * binary blob of all frames, concatenated row-major little-endian float32.
 * Blob size is exactly frame_count * height * width * 4 bytes.
 */
inline void write_ptychogram(const std::filesystem::path& dir, const Ptychogram& gram,
                             uint64_t seed) {
    gram.validate();
    std::filesystem::create_directories(dir);
    const int h = gram.frames.front().height();
    const int w = gram.frames.front().width();

    std::ostringstream m;
    m << "version = 1\n";
    m << "frame_count = " << gram.frames.size() << "\n";
    m << "height = " << h << "\n";
    m << "width = " << w << "\n";
    m << "pitch = " << fmt_double(gram.meta.pitch) << "\n";
    m << "wavelength = " << fmt_double(gram.meta.wavelength) << "\n";
    m << "defocus_d = " << fmt_double(gram.meta.defocus_d) << "\n";
    m << "photon_scale = " << fmt_double(gram.meta.noise.photon_scale) << "\n";
    m << "read_sigma = " << fmt_double(gram.meta.noise.read_sigma) << "\n";
    m << "bit_depth = " << gram.meta.noise.bit_depth << "\n";
    m << "seed = " << seed << "\n";
    m << "trajectory_rows = " << gram.trajectory.rows << "\n";
    m << "trajectory_cols = " << gram.trajectory.cols << "\n";
    m << "trajectory_extent_x = " << fmt_double(gram.trajectory.extent_x) << "\n";
    m << "trajectory_extent_y = " << fmt_double(gram.trajectory.extent_y) << "\n";
    for (size_t i = 0; i < gram.trajectory.positions.size(); ++i)
        m << "traj = " << i << " " << fmt_double(gram.trajectory.positions[i][0]) << " "
          << fmt_double(gram.trajectory.positions[i][1]) << "\n";
    detail::write_file(dir / "manifest.txt", m.str());

    std::ofstream blob(dir / "frames.f32", std::ios::binary | std::ios::trunc);
    if (!blob) throw DataError("cannot write '" + (dir / "frames.f32").string() + "'");
    std::vector<float> row(static_cast<size_t>(h) * w);
    for (const auto& frame : gram.frames) {
        const auto& src = frame.samples();
        for (size_t k = 0; k < src.size(); ++k) row[k] = static_cast<float>(src[k]);
        blob.write(reinterpret_cast<const char*>(row.data()),
                   static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

inline std::pair<Ptychogram, uint64_t> read_ptychogram(const std::filesystem::path& dir) {
    const auto entries = detail::parse_kv(detail::read_file(dir / "manifest.txt"));
    std::map<std::string, std::string> kv;
    std::vector<std::array<double, 2>> positions;
    for (const auto& [key, value] : entries) {
        if (key == "traj") {
            std::istringstream ss(value);
            size_t idx;
            double sx, sy;
            if (!(ss >> idx >> sx >> sy))
                throw DataError("container manifest: malformed traj entry '" + value + "'");
            if (idx != positions.size())
                throw DataError("container manifest: traj entries out of order");
            positions.push_back({sx, sy});
        } else {
            kv[key] = value;
        }
    }
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("container manifest: missing key '" + key + "'");
        return it->second;
    };
    if (need("version") != "1")
        throw DataError("container manifest: unsupported version " + kv["version"]);

    Ptychogram gram;
    const size_t frame_count = std::stoull(need("frame_count"));
    const int h = std::stoi(need("height"));
    const int w = std::stoi(need("width"));
    gram.meta.pitch = std::stod(need("pitch"));
    gram.meta.wavelength = std::stod(need("wavelength"));
    gram.meta.defocus_d = std::stod(need("defocus_d"));
    gram.meta.noise.photon_scale = std::stod(need("photon_scale"));
    gram.meta.noise.read_sigma = std::stod(need("read_sigma"));
    gram.meta.noise.bit_depth = std::stoi(need("bit_depth"));
    const uint64_t seed = std::stoull(need("seed"));
    gram.trajectory.rows = std::stoi(need("trajectory_rows"));
    gram.trajectory.cols = std::stoi(need("trajectory_cols"));
    gram.trajectory.extent_x = std::stod(need("trajectory_extent_x"));
    gram.trajectory.extent_y = std::stod(need("trajectory_extent_y"));
    gram.trajectory.positions = std::move(positions);
    if (gram.trajectory.positions.size() != frame_count)
        throw DataError("container manifest: frame_count " + std::to_string(frame_count) +
                        " does not match trajectory length " +
                        std::to_string(gram.trajectory.positions.size()));

    const auto blob_path = dir / "frames.f32";
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw DataError("cannot read '" + blob_path.string() + "'");
    const size_t expected = frame_count * static_cast<size_t>(h) * w * sizeof(float);
    const size_t actual = std::filesystem::file_size(blob_path);
    if (actual != expected)
        throw DataError("container blob '" + blob_path.string() + "' has " +
                        std::to_string(actual) + " bytes, expected exactly " +
                        std::to_string(expected) + " (mismatch at offset " +
                        std::to_string(std::min(actual, expected)) + ")");
    std::vector<float> row(static_cast<size_t>(h) * w);
    gram.frames.reserve(frame_count);
    for (size_t i = 0; i < frame_count; ++i) {
        blob.read(reinterpret_cast<char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
        IntensityFrame frame(h, w, gram.meta.pitch);
        for (size_t k = 0; k < row.size(); ++k)
            frame.samples()[k] = std::max(0.0, static_cast<double>(row[k]));
        gram.frames.push_back(std::move(frame));
    }
    gram.validate();
    return {std::move(gram), seed};
}

/// Complex field dump: "PNLOSFD1", int32 h, w, float64 pitch, wavelength,
/// then h*w interleaved float64 (re, im), row-major little-endian.
inline void write_cfield(const std::filesystem::path& path, const ComplexField& field) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write("PNLOSFD1", 8);
    const int32_t h = field.height(), w = field.width();
    const double pitch = field.pitch(), wavelength = field.wavelength();
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&pitch), 8);
    out.write(reinterpret_cast<const char*>(&wavelength), 8);
    out.write(reinterpret_cast<const char*>(field.samples().data()),
              static_cast<std::streamsize>(field.size() * sizeof(cplx)));
}

inline ComplexField read_cfield(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, "PNLOSFD1", 8) != 0)
        throw DataError("'" + path.string() + "' is not a field dump");
    int32_t h = 0, w = 0;
    double pitch = 0.0, wavelength = 0.0;
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&pitch), 8);
    in.read(reinterpret_cast<char*>(&wavelength), 8);
    if (h < 2 || w < 2 || !(pitch > 0.0) || !(wavelength > 0.0))
        throw DataError("'" + path.string() + "' has a corrupt field-dump header");
    ComplexField field(h, w, pitch, wavelength);
    in.read(reinterpret_cast<char*>(field.samples().data()),
            static_cast<std::streamsize>(field.size() * sizeof(cplx)));
    if (in.gcount() != static_cast<std::streamsize>(field.size() * sizeof(cplx)))
        throw DataError("'" + path.string() + "' is truncated");
    return field;
}

/// Real raster dump: "PNLOSRF1", int32 h, w, float64 pitch, then h*w float64.
inline void write_rfield(const std::filesystem::path& path, const std::vector<double>& data,
                         int h, int w, double pitch) {
    if (data.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("write_rfield: size mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write("PNLOSRF1", 8);
    const int32_t hh = h, ww = w;
    out.write(reinterpret_cast<const char*>(&hh), 4);
    out.write(reinterpret_cast<const char*>(&ww), 4);
    out.write(reinterpret_cast<const char*>(&pitch), 8);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
}

/// 8-bit binary PGM with a sidecar recording the linear min-max mapping, so
/// images stay viewable while quantitative work reads the binary dumps.
inline void write_pgm_with_sidecar(const std::filesystem::path& path,
                                   const std::vector<double>& data, int h, int w) {
    double lo = data.empty() ? 0.0 : data[0];
    double hi = lo;
    for (double v : data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(data.size());
    for (size_t k = 0; k < data.size(); ++k)
        row[k] = static_cast<unsigned char>(std::lround((data[k] - lo) * scale));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));

    std::ostringstream side;
    side << "min = " << fmt_double(lo) << "\nmax = " << fmt_double(hi) << "\n";
    detail::write_file(path.string() + ".scale.txt", side.str());
}

/// Layer-hypothesis file: alphas, refinement history and per-frame shifts
/// in pixels as structured text.
inline void write_hypotheses(const std::filesystem::path& path,
                             const std::vector<LayerHypothesis>& hypotheses) {
    std::ostringstream out;
    out << "layers = " << hypotheses.size() << "\n";
    for (size_t l = 0; l < hypotheses.size(); ++l) {
        const auto& hyp = hypotheses[l];
        out << "layer = " << l << "\n";
        out << "alpha = " << fmt_double(hyp.alpha) << "\n";
        out << "warnings = " << hyp.correlation_warnings << "\n";
        out << "history =";
        for (double v : hyp.refinement_history) out << " " << fmt_double(v);
        out << "\n";
        for (size_t i = 0; i < hyp.shifts_px.size(); ++i)
            out << "shift = " << i << " " << fmt_double(hyp.shifts_px[i][0]) << " "
                << fmt_double(hyp.shifts_px[i][1]) << "\n";
    }
    detail::write_file(path, out.str());
}

inline std::vector<LayerHypothesis> read_hypotheses(const std::filesystem::path& path) {
    const auto entries = detail::parse_kv(detail::read_file(path));
    std::vector<LayerHypothesis> hyps;
    LayerHypothesis* current = nullptr;
    for (const auto& [key, value] : entries) {
        if (key == "layers") {
            hyps.reserve(std::stoull(value));
        } else if (key == "layer") {
            hyps.emplace_back();
            current = &hyps.back();
        } else if (current == nullptr) {
            throw DataError("hypothesis file: key '" + key + "' before any layer block");
        } else if (key == "alpha") {
            current->alpha = std::stod(value);
        } else if (key == "warnings") {
            current->correlation_warnings = std::stoi(value);
        } else if (key == "history") {
            std::istringstream ss(value);
            double v;
            while (ss >> v) current->refinement_history.push_back(v);
        } else if (key == "shift") {
            std::istringstream ss(value);
            size_t idx;
            double sx, sy;
            if (!(ss >> idx >> sx >> sy))
                throw DataError("hypothesis file: malformed shift entry '" + value + "'");
            if (idx != current->shifts_px.size())
                throw DataError("hypothesis file: shift entries out of order");
            current->shifts_px.push_back({sx, sy});
        }
    }
    if (hyps.empty()) throw DataError("hypothesis file '" + path.string() + "': no layers");
    return hyps;
}

/// Two-column CSV with a header line.
inline void write_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<std::pair<double, double>>& rows) {
    std::ostringstream out;
    out << header << "\n";
    for (const auto& [a, b] : rows) out << fmt_double(a) << "," << fmt_double(b) << "\n";
    detail::write_file(path, out.str());
}

/// FNV-1a hash of a file's bytes, for reproducibility records.
inline uint64_t file_hash(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

} // namespace pnlos
