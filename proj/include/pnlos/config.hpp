#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pnlos/coded_surface.hpp"
#include "pnlos/errors.hpp"
#include "pnlos/recon.hpp"
#include "pnlos/scene.hpp"
#include "pnlos/targets.hpp"

namespace pnlos {

/// One [layer] block: a generated or loaded reflectance target placed at a
/// depth with a lateral offset.
struct LayerConfig {
    std::string kind = "usaf_bars";  // usaf_bars | text | image_file | blank
    std::vector<double> linewidths;
    bool horizontal = false;
    std::string text;
    int text_scale = 8;
    std::string file;
    double amplitude = 1.0;
    double depth = 0.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
    double rough_phase = 0.0;  // radians peak-to-peak; 0 = optically smooth
    double rough_correlation_px = 2.0;
    uint64_t rough_seed = 1;
};

/// Parsed and validated run configuration (scene, acquisition, recovery and
/// analysis sections plus the master seed).
struct RunConfig {
    uint64_t seed = 1;

    // acquisition
    int grid = 256;
    double pitch = 8e-6;
    double wavelength = 532e-9;
    double defocus = 0.75e-3;
    int traj_rows = 11;
    int traj_cols = 11;
    double traj_extent_x = 1.0e-3;
    double traj_extent_y = 1.0e-3;
    NoiseModel noise;

    Geometry geometry;

    // coded surface
    uint64_t cs_seed = 7;
    double cs_amp_lo = 0.6;
    double cs_amp_hi = 1.0;
    double cs_phase_range = 3.141592653589793;
    double cs_correlation_length = 32e-6;

    std::vector<LayerConfig> layers;

    // recovery
    double alpha_min = 0.0;
    double alpha_max = 1.2;
    double alpha_step = 0.02;
    double prominence = 0.15;
    int refine_passes = 3;
    ReconConfig recon;

    // analysis
    double sweep_min = 0.44;
    double sweep_max = 0.48;
    double sweep_step = 0.001;
    int segments_rows = 3;
    int segments_cols = 6;
    double segment_overlap = 0.2;
    std::vector<double> delta_z;
    double standoff = 0.4;
    int crosstalk_epochs = 25;
    double crosstalk_alpha_step = 0.01;

    ScanTrajectory make_trajectory() const {
        return ScanTrajectory::raster(traj_rows, traj_cols, traj_extent_x, traj_extent_y);
    }

    AcquisitionMeta make_meta() const {
        return AcquisitionMeta{defocus, wavelength, pitch, noise};
    }

    CodedSurface make_coded_surface() const {
        return synthesize_coded_surface(cs_seed, grid, grid, pitch, wavelength,
                                        cs_correlation_length, cs_amp_lo, cs_amp_hi,
                                        cs_phase_range);
    }

    ObjectLayer make_layer(const LayerConfig& lc) const {
        TargetParams params;
        params.pitch = pitch;
        params.wavelength = wavelength;
        params.amplitude = lc.amplitude;
        params.linewidths = lc.linewidths;
        params.horizontal = lc.horizontal;
        params.text = lc.text;
        params.text_scale = lc.text_scale;
        params.file = lc.file;
        ComplexField reflectance = make_test_target(lc.kind, params);
        if (lc.rough_phase > 0.0)
            reflectance = roughen_surface(reflectance, lc.rough_phase, lc.rough_correlation_px,
                                          lc.rough_seed);
        return ObjectLayer{std::move(reflectance), lc.depth, {lc.offset_x, lc.offset_y}};
    }

    std::vector<ObjectLayer> make_layers() const {
        std::vector<ObjectLayer> out;
        for (const auto& lc : layers) out.push_back(make_layer(lc));
        return out;
    }
};

namespace detail {

struct ConfigValue {
    std::string section;
    std::string key;
    std::string raw;

    double as_double() const {
        try {
            size_t pos = 0;
            const double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("[" + section + "]." + key + ": '" + raw + "' is not a number");
        }
    }

    int as_int() const {
        try {
            size_t pos = 0;
            const int v = std::stoi(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("[" + section + "]." + key + ": '" + raw + "' is not an integer");
        }
    }

    uint64_t as_seed() const {
        try {
            return std::stoull(raw);
        } catch (const std::exception&) {
            throw ConfigError("[" + section + "]." + key + ": '" + raw + "' is not a seed");
        }
    }

    bool as_bool() const {
        if (raw == "true" || raw == "1" || raw == "yes") return true;
        if (raw == "false" || raw == "0" || raw == "no") return false;
        throw ConfigError("[" + section + "]." + key + ": '" + raw + "' is not a boolean");
    }

    std::vector<double> as_double_list() const {
        std::istringstream ss(raw);
        std::vector<double> out;
        std::string tok;
        while (ss >> tok) {
            try {
                out.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ConfigError("[" + section + "]." + key + ": '" + tok + "' is not a number");
            }
        }
        return out;
    }
};

} // namespace detail

/**
 * Parses the structured key-value run configuration. Sections are
 * [acquisition], [geometry], [coded_surface], [recovery], [analysis] and
 * repeatable [layer] blocks; 'seed' lives at the top. Unknown sections and
 * keys are rejected with the offending field named.
 */
inline RunConfig parse_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");

    RunConfig cfg;
    cfg.delta_z = {0.002, 0.022, 0.042, 0.052};

    auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        const size_t a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        const size_t b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
    };

    const std::set<std::string> known_sections = {"",          "acquisition", "geometry",
                                                  "coded_surface", "layer",   "recovery",
                                                  "analysis"};
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (!known_sections.count(section))
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            if (section == "layer") cfg.layers.emplace_back();
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        detail::ConfigValue v{section, key, trim(line.substr(eq + 1))};

        if (section.empty()) {
            if (key == "seed") cfg.seed = v.as_seed();
            else throw ConfigError("config: unknown top-level key '" + key + "'");
        } else if (section == "acquisition") {
            if (key == "grid") cfg.grid = v.as_int();
            else if (key == "pitch") cfg.pitch = v.as_double();
            else if (key == "wavelength") cfg.wavelength = v.as_double();
            else if (key == "defocus") cfg.defocus = v.as_double();
            else if (key == "traj_rows") cfg.traj_rows = v.as_int();
            else if (key == "traj_cols") cfg.traj_cols = v.as_int();
            else if (key == "traj_extent") cfg.traj_extent_x = cfg.traj_extent_y = v.as_double();
            else if (key == "traj_extent_x") cfg.traj_extent_x = v.as_double();
            else if (key == "traj_extent_y") cfg.traj_extent_y = v.as_double();
            else if (key == "photon_scale") cfg.noise.photon_scale = v.as_double();
            else if (key == "read_sigma") cfg.noise.read_sigma = v.as_double();
            else if (key == "bit_depth") cfg.noise.bit_depth = v.as_int();
            else throw ConfigError("[acquisition]: unknown key '" + key + "'");
        } else if (section == "geometry") {
            if (key == "kappa") cfg.geometry.kappa = v.as_double();
            else if (key == "z_ref") cfg.geometry.z_ref = v.as_double();
            else throw ConfigError("[geometry]: unknown key '" + key + "'");
        } else if (section == "coded_surface") {
            if (key == "seed") cfg.cs_seed = v.as_seed();
            else if (key == "amp_lo") cfg.cs_amp_lo = v.as_double();
            else if (key == "amp_hi") cfg.cs_amp_hi = v.as_double();
            else if (key == "phase_range") cfg.cs_phase_range = v.as_double();
            else if (key == "correlation_length") cfg.cs_correlation_length = v.as_double();
            else throw ConfigError("[coded_surface]: unknown key '" + key + "'");
        } else if (section == "layer") {
            LayerConfig& lc = cfg.layers.back();
            if (key == "kind") lc.kind = v.raw;
            else if (key == "linewidths") lc.linewidths = v.as_double_list();
            else if (key == "horizontal") lc.horizontal = v.as_bool();
            else if (key == "text") lc.text = v.raw;
            else if (key == "text_scale") lc.text_scale = v.as_int();
            else if (key == "file") lc.file = v.raw;
            else if (key == "amplitude") lc.amplitude = v.as_double();
            else if (key == "depth") lc.depth = v.as_double();
            else if (key == "offset_x") lc.offset_x = v.as_double();
            else if (key == "offset_y") lc.offset_y = v.as_double();
            else if (key == "rough_phase") lc.rough_phase = v.as_double();
            else if (key == "rough_correlation_px") lc.rough_correlation_px = v.as_double();
            else if (key == "rough_seed") lc.rough_seed = v.as_seed();
            else throw ConfigError("[layer]: unknown key '" + key + "'");
        } else if (section == "recovery") {
            if (key == "alpha_min") cfg.alpha_min = v.as_double();
            else if (key == "alpha_max") cfg.alpha_max = v.as_double();
            else if (key == "alpha_step") cfg.alpha_step = v.as_double();
            else if (key == "prominence") cfg.prominence = v.as_double();
            else if (key == "refine_passes") cfg.refine_passes = v.as_int();
            else if (key == "epochs") cfg.recon.epochs = v.as_int();
            else if (key == "gamma") cfg.recon.gamma = v.as_double();
            else if (key == "beta") cfg.recon.beta = v.as_double();
            else if (key == "epsilon_rel") cfg.recon.epsilon_rel = v.as_double();
            else if (key == "tv_weight") cfg.recon.tv_weight = v.as_double();
            else if (key == "tv_inner_steps") cfg.recon.tv_inner_steps = v.as_int();
            else if (key == "order_seed") cfg.recon.order_seed = v.as_seed();
            else if (key == "frame_order") {
                if (v.raw == "sequential") cfg.recon.frame_order = FrameOrder::Sequential;
                else if (v.raw == "shuffled") cfg.recon.frame_order = FrameOrder::Shuffled;
                else
                    throw ConfigError(
                        "[recovery].frame_order: expected 'sequential' or 'shuffled'");
            } else throw ConfigError("[recovery]: unknown key '" + key + "'");
        } else if (section == "analysis") {
            if (key == "sweep_min") cfg.sweep_min = v.as_double();
            else if (key == "sweep_max") cfg.sweep_max = v.as_double();
            else if (key == "sweep_step") cfg.sweep_step = v.as_double();
            else if (key == "segments_rows") cfg.segments_rows = v.as_int();
            else if (key == "segments_cols") cfg.segments_cols = v.as_int();
            else if (key == "segment_overlap") cfg.segment_overlap = v.as_double();
            else if (key == "delta_z") cfg.delta_z = v.as_double_list();
            else if (key == "standoff") cfg.standoff = v.as_double();
            else if (key == "crosstalk_epochs") cfg.crosstalk_epochs = v.as_int();
            else if (key == "crosstalk_alpha_step") cfg.crosstalk_alpha_step = v.as_double();
            else throw ConfigError("[analysis]: unknown key '" + key + "'");
        }
    }

    // cross-field validation with field-level messages
    auto positive = [](double v, const std::string& field) {
        if (!(v > 0.0)) throw ConfigError(field + ": must be positive");
    };
    if (cfg.grid < 8) throw ConfigError("[acquisition].grid: must be at least 8");
    positive(cfg.pitch, "[acquisition].pitch");
    positive(cfg.wavelength, "[acquisition].wavelength");
    positive(cfg.defocus, "[acquisition].defocus");
    if (cfg.traj_rows < 1 || cfg.traj_cols < 1 || cfg.traj_rows * cfg.traj_cols < 2)
        throw ConfigError("[acquisition].traj_rows/traj_cols: need at least 2 scan positions");
    positive(cfg.traj_extent_x, "[acquisition].traj_extent_x");
    positive(cfg.traj_extent_y, "[acquisition].traj_extent_y");
    if (cfg.noise.photon_scale < 0.0)
        throw ConfigError("[acquisition].photon_scale: must be >= 0");
    if (cfg.noise.read_sigma < 0.0) throw ConfigError("[acquisition].read_sigma: must be >= 0");
    if (cfg.noise.bit_depth < 0 || cfg.noise.bit_depth > 31)
        throw ConfigError("[acquisition].bit_depth: must be in [0, 31]");
    if (cfg.geometry.kappa < 0.0) throw ConfigError("[geometry].kappa: must be >= 0");
    positive(cfg.geometry.z_ref, "[geometry].z_ref");
    if (!(cfg.cs_amp_lo > 0.0 && cfg.cs_amp_lo <= cfg.cs_amp_hi && cfg.cs_amp_hi <= 1.0))
        throw ConfigError("[coded_surface].amp_lo/amp_hi: need 0 < amp_lo <= amp_hi <= 1");
    if (cfg.cs_correlation_length < cfg.pitch)
        throw ConfigError("[coded_surface].correlation_length: must be at least one pitch");
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        const auto& lc = cfg.layers[i];
        const std::string where = "[layer] #" + std::to_string(i + 1);
        if (lc.kind != "usaf_bars" && lc.kind != "text" && lc.kind != "image_file" &&
            lc.kind != "blank")
            throw ConfigError(where + ".kind: unknown target kind '" + lc.kind + "'");
        if (!(lc.depth > 0.0)) throw ConfigError(where + ".depth: must be positive");
        if (!(lc.amplitude > 0.0 && lc.amplitude <= 1.0))
            throw ConfigError(where + ".amplitude: must be in (0, 1]");
        if (lc.kind == "image_file" && !std::filesystem::exists(lc.file))
            throw ConfigError(where + ".file: '" + lc.file + "' does not exist");
    }
    if (!(cfg.alpha_step > 0.0)) throw ConfigError("[recovery].alpha_step: must be positive");
    if (!(cfg.alpha_max >= cfg.alpha_min))
        throw ConfigError("[recovery].alpha_max: must be >= alpha_min");
    if (cfg.refine_passes < 0) throw ConfigError("[recovery].refine_passes: must be >= 0");
    try {
        cfg.recon.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("[recovery]: ") + e.what());
    }
    if (!(cfg.sweep_min < cfg.sweep_max) || !(cfg.sweep_step > 0.0))
        throw ConfigError("[analysis].sweep_min/sweep_max/sweep_step: need min < max, step > 0");
    if (cfg.segments_rows < 1 || cfg.segments_cols < 1)
        throw ConfigError("[analysis].segments_rows/segments_cols: must be >= 1");
    if (!(cfg.segment_overlap >= 0.0 && cfg.segment_overlap < 0.5))
        throw ConfigError("[analysis].segment_overlap: must lie in [0, 0.5)");
    positive(cfg.standoff, "[analysis].standoff");
    return cfg;
}

} // namespace pnlos
