// pnlos command-line front end: simulate scenes, scan scale factors,
// reconstruct, and run the depth analyses, all driven by a config file.
// Outputs are pure functions of (inputs, config, seed); wall-clock info goes
// to a separate log file so re-runs stay byte-identical.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnlos/config.hpp"
#include "pnlos/container.hpp"
#include "pnlos/pnlos.hpp"

namespace fs = std::filesystem;
using namespace pnlos;

namespace {

struct GlobalFlags {
    std::optional<uint64_t> seed_override;
    std::optional<int> epochs_override;
    bool quiet = false;
};

void say(const GlobalFlags& flags, const std::string& msg) {
    if (!flags.quiet) std::cout << msg << "\n";
}

void write_log(const fs::path& out_dir, const std::string& what, double seconds) {
    std::ofstream log(out_dir / "run.log", std::ios::app);
    log << what << " took " << seconds << " s\n";
}

void dump_amp_phase(const fs::path& dir, const std::string& stem, const ComplexField& field) {
    std::vector<double> amp(field.size()), phase(field.size());
    for (size_t k = 0; k < field.size(); ++k) {
        amp[k] = std::abs(field.samples()[k]);
        phase[k] = std::arg(field.samples()[k]);
    }
    write_pgm_with_sidecar(dir / (stem + "_amp.pgm"), amp, field.height(), field.width());
    write_pgm_with_sidecar(dir / (stem + "_phase.pgm"), phase, field.height(), field.width());
}

int cmd_simulate(const fs::path& config_path, const fs::path& out_dir, const GlobalFlags& flags) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = parse_run_config(config_path);
    if (flags.seed_override) cfg.seed = *flags.seed_override;
    if (cfg.layers.empty()) throw ConfigError("[layer]: config defines no layers to simulate");

    const CodedSurface cs = cfg.make_coded_surface();
    const ScanTrajectory trajectory = cfg.make_trajectory();
    const AcquisitionMeta meta = cfg.make_meta();
    auto [gram, record] =
        simulate_ptychogram(cfg.make_layers(), cs, trajectory, meta, cfg.geometry, cfg.seed);

    fs::create_directories(out_dir);
    write_ptychogram(out_dir, gram, cfg.seed);

    const fs::path gt_dir = out_dir / "gt";
    fs::create_directories(gt_dir);
    write_cfield(gt_dir / "cs.cfield", record.cs.profile);
    std::ostringstream shifts;
    shifts << "layers = " << record.layers.size() << "\n";
    for (size_t j = 0; j < record.layers.size(); ++j) {
        const auto& layer = record.layers[j];
        write_cfield(gt_dir / ("layer_" + std::to_string(j) + "_wall.cfield"), layer.wall_field);
        write_cfield(gt_dir / ("layer_" + std::to_string(j) + "_object.cfield"),
                     layer.object_field);
        shifts << "layer = " << j << "\ndepth = " << fmt_double(layer.depth)
               << "\nalpha = " << fmt_double(layer.alpha) << "\n";
        for (size_t i = 0; i < layer.shifts_px.size(); ++i)
            shifts << "shift = " << i << " " << fmt_double(layer.shifts_px[i][0]) << " "
                   << fmt_double(layer.shifts_px[i][1]) << "\n";
    }
    detail::write_file(gt_dir / "shifts.txt", shifts.str());

    std::ostringstream rec;
    rec << "config_hash = " << file_hash(config_path) << "\nseed = " << cfg.seed << "\n";
    detail::write_file(out_dir / "record.txt", rec.str());

    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_log(out_dir, "simulate", dt);
    say(flags, "wrote " + std::to_string(gram.frames.size()) + " frames to " + out_dir.string());
    return 0;
}

int cmd_scan_scales(const fs::path& container_dir, const fs::path& out_dir,
                    const std::optional<fs::path>& config_path, const GlobalFlags& flags) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    if (config_path) cfg = parse_run_config(*config_path);
    auto [gram, seed] = read_ptychogram(container_dir);

    const ScaleScanResult scan = scan_scale_factors(gram, gram.trajectory, cfg.alpha_min,
                                                    cfg.alpha_max, cfg.alpha_step, cfg.prominence);
    std::vector<LayerHypothesis> hyps = hypotheses_from_scan(scan, gram.trajectory, gram.meta.pitch);
    if (!hyps.empty() && cfg.refine_passes > 0)
        hyps = refine_shifts(gram, std::move(hyps), cfg.refine_passes);

    fs::create_directories(out_dir);
    std::vector<std::pair<double, double>> rows;
    for (size_t k = 0; k < scan.alphas.size(); ++k)
        rows.emplace_back(scan.alphas[k], scan.brenner[k]);
    write_csv(out_dir / "scale_scan.csv", "alpha,brenner", rows);
    write_hypotheses(out_dir / "hypotheses.txt", hyps);

    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_log(out_dir, "scan-scales", dt);
    say(flags, "detected " + std::to_string(hyps.size()) + " layer(s)");
    return 0;
}

int cmd_reconstruct(const fs::path& container_dir, const fs::path& hypotheses_path,
                    const fs::path& out_dir, const std::optional<fs::path>& config_path,
                    const GlobalFlags& flags) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    if (config_path) cfg = parse_run_config(*config_path);
    if (flags.epochs_override) cfg.recon.epochs = *flags.epochs_override;
    auto [gram, seed] = read_ptychogram(container_dir);
    const std::vector<LayerHypothesis> hyps = read_hypotheses(hypotheses_path);

    auto [state, report] = run_reconstruction(gram, hyps, cfg.recon);

    fs::create_directories(out_dir);
    write_cfield(out_dir / "cs.cfield", state.cs);
    dump_amp_phase(out_dir, "cs", state.cs);

    std::ostringstream manifest;
    manifest << "layers = " << state.layers.size() << "\nepochs = " << report.epochs_run << "\n";
    for (size_t j = 0; j < state.layers.size(); ++j) {
        auto& layer = state.layers[j];
        write_cfield(out_dir / ("layer_" + std::to_string(j) + "_wall.cfield"), layer.wavefield);
        dump_amp_phase(out_dir, "layer_" + std::to_string(j), layer.wavefield);
        manifest << "layer = " << j << "\nalpha = " << fmt_double(layer.hypothesis.alpha) << "\n";
        if (layer.hypothesis.alpha > 0.0) {
            const double depth = cfg.geometry.depth_for_alpha(layer.hypothesis.alpha);
            layer.depth_estimate = depth;
            manifest << "depth_estimate = " << fmt_double(depth) << "\n";
            const ComplexField object =
                recover_object(layer.wavefield, depth, cfg.recon.tv_weight, cfg.recon.tv_inner_steps);
            write_cfield(out_dir / ("object_" + std::to_string(j) + ".cfield"), object);
            dump_amp_phase(out_dir, "object_" + std::to_string(j), object);
        } else {
            manifest << "depth_estimate = unknown\n";
        }
    }
    detail::write_file(out_dir / "state.txt", manifest.str());

    std::vector<std::pair<double, double>> rows;
    for (size_t e = 0; e < report.residual_history.size(); ++e)
        rows.emplace_back(static_cast<double>(e), report.residual_history[e]);
    write_csv(out_dir / "residuals.csv", "epoch,misfit", rows);

    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_log(out_dir, "reconstruct", dt);
    if (!report.residual_history.empty())
        say(flags, "final misfit " + fmt_double(report.residual_history.back()));
    return 0;
}

int cmd_analyze(const fs::path& state_dir, const std::string& mode, const fs::path& out_dir,
                const std::optional<fs::path>& config_path, const GlobalFlags& flags) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    if (config_path) cfg = parse_run_config(*config_path);
    fs::create_directories(out_dir);

    if (mode == "sweep") {
        const SegmentGrid segments{cfg.segments_rows, cfg.segments_cols, cfg.segment_overlap};
        int layer_index = 0;
        std::ostringstream best;
        best << "layer,segment_row,segment_col,best_depth,defined\n";
        while (fs::exists(state_dir / ("layer_" + std::to_string(layer_index) + "_wall.cfield"))) {
            const ComplexField wall = read_cfield(
                state_dir / ("layer_" + std::to_string(layer_index) + "_wall.cfield"));
            const DepthSweepResult sweep =
                refocus_sweep(wall, segments, cfg.sweep_min, cfg.sweep_max, cfg.sweep_step);

            std::ostringstream curve;
            curve << "depth";
            for (int s = 0; s < segments.count(); ++s) curve << ",seg_" << s;
            curve << "\n";
            for (size_t k = 0; k < sweep.depths.size(); ++k) {
                curve << fmt_double(sweep.depths[k]);
                for (int s = 0; s < segments.count(); ++s)
                    curve << "," << fmt_double(sweep.brenner[s][k]);
                curve << "\n";
            }
            detail::write_file(
                out_dir / ("sweep_layer_" + std::to_string(layer_index) + ".csv"), curve.str());

            for (int r = 0; r < segments.rows; ++r)
                for (int c = 0; c < segments.cols; ++c) {
                    const auto& d = sweep.best_depth[r * segments.cols + c];
                    best << layer_index << "," << r << "," << c << ","
                         << (d ? fmt_double(*d) : "nan") << "," << (d ? 1 : 0) << "\n";
                }

            const DepthMap map = compose_all_in_focus(wall, sweep, segments);
            write_pgm_with_sidecar(out_dir / ("all_in_focus_" + std::to_string(layer_index) +
                                              ".pgm"),
                                   map.all_in_focus.samples(), map.all_in_focus.height(),
                                   map.all_in_focus.width());
            write_rfield(out_dir / ("all_in_focus_" + std::to_string(layer_index) + ".rfield"),
                         map.all_in_focus.samples(), map.all_in_focus.height(),
                         map.all_in_focus.width(), map.all_in_focus.pitch());
            write_pgm_with_sidecar(out_dir / ("depth_raster_" + std::to_string(layer_index) +
                                              ".pgm"),
                                   map.depth_raster, map.all_in_focus.height(),
                                   map.all_in_focus.width());
            write_rfield(out_dir / ("depth_raster_" + std::to_string(layer_index) + ".rfield"),
                         map.depth_raster, map.all_in_focus.height(), map.all_in_focus.width(),
                         map.all_in_focus.pitch());
            ++layer_index;
        }
        if (layer_index == 0)
            throw DataError("analyze sweep: no layer_*_wall.cfield dumps in '" +
                            state_dir.string() + "'");
        detail::write_file(out_dir / "best_depth.csv", best.str());
    } else if (mode == "crosstalk") {
        if (!config_path) throw ConfigError("analyze crosstalk requires --config");
        if (cfg.layers.size() < 2)
            throw ConfigError("[layer]: crosstalk analysis needs two layers in the config");
        if (cfg.delta_z.size() < 3)
            throw ConfigError("[analysis].delta_z: need at least 3 increasing values");

        CrosstalkPipelineConfig pipeline;
        pipeline.alpha_min = cfg.alpha_min;
        pipeline.alpha_max = cfg.alpha_max;
        pipeline.alpha_step = cfg.crosstalk_alpha_step;
        pipeline.prominence_fraction = cfg.prominence;
        pipeline.refine_passes = cfg.refine_passes;
        pipeline.recon = cfg.recon;
        pipeline.recon.epochs = cfg.crosstalk_epochs;

        const RunConfig base = cfg;
        auto builder = [&base](double dz) {
            CrosstalkScene scene;
            RunConfig local = base;
            local.layers[0].depth = base.standoff;
            local.layers[1].depth = base.standoff + dz;
            scene.layers = {local.make_layer(local.layers[0]), local.make_layer(local.layers[1])};
            scene.cs = local.make_coded_surface();
            scene.trajectory = local.make_trajectory();
            scene.meta = local.make_meta();
            scene.geometry = local.geometry;
            scene.seed = local.seed;
            return scene;
        };
        const CrosstalkReport report = residual_contrast_curve(builder, cfg.delta_z, pipeline);

        std::ostringstream csv;
        csv << "delta_z,residual_contrast\n";
        for (size_t i = 0; i < report.delta_z.size(); ++i)
            csv << fmt_double(report.delta_z[i]) << ","
                << fmt_double(report.residual_contrast[i]) << "\n";
        detail::write_file(out_dir / "crosstalk.csv", csv.str());
        std::ostringstream summary;
        summary << "resolved_delta_z = "
                << (report.resolved_delta_z ? fmt_double(*report.resolved_delta_z) : "none")
                << "\npartial = " << (report.partial ? 1 : 0) << "\n";
        for (const auto& failure : report.failures) summary << "failure = " << failure << "\n";
        detail::write_file(out_dir / "crosstalk_summary.txt", summary.str());
    } else {
        throw ConfigError("analyze: mode must be 'sweep' or 'crosstalk'");
    }

    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_log(out_dir, "analyze " + mode, dt);
    say(flags, "analysis written to " + out_dir.string());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ptychographic non-line-of-sight imaging toolkit"};
    app.require_subcommand(1);

    GlobalFlags flags;
    uint64_t seed_value = 0;
    int epochs_value = 0;

    std::string config_path, out_dir, container_dir, hypotheses_path, state_dir, mode;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_flag("--quiet", flags.quiet, "suppress progress output");
        cmd->add_option("--seed-override", seed_value, "replace the config seed")
            ->each([&](const std::string&) { flags.seed_override = seed_value; });
        cmd->add_option("--epochs-override", epochs_value, "replace the configured epoch count")
            ->each([&](const std::string&) { flags.epochs_override = epochs_value; });
    };

    CLI::App* sim = app.add_subcommand("simulate", "synthesize a ptychogram from a scene config");
    sim->add_option("--config", config_path, "run configuration")->required();
    sim->add_option("--out", out_dir, "output directory")->required();
    add_common(sim);

    CLI::App* scan = app.add_subcommand("scan-scales", "blind layer detection by scale scanning");
    scan->add_option("--container", container_dir, "ptychogram container directory")->required();
    scan->add_option("--out", out_dir, "output directory")->required();
    scan->add_option("--config", config_path, "run configuration (recovery section)");
    add_common(scan);

    CLI::App* rec = app.add_subcommand("reconstruct", "depth-multiplexed reconstruction");
    rec->add_option("--container", container_dir, "ptychogram container directory")->required();
    rec->add_option("--hypotheses", hypotheses_path, "hypothesis file from scan-scales")
        ->required();
    rec->add_option("--out", out_dir, "output directory")->required();
    rec->add_option("--config", config_path, "run configuration (recovery section)");
    add_common(rec);

    CLI::App* ana = app.add_subcommand("analyze", "depth sweep or crosstalk analysis");
    ana->add_option("--state", state_dir, "reconstruction output directory (sweep mode)");
    ana->add_option("--mode", mode, "sweep | crosstalk")->required();
    ana->add_option("--out", out_dir, "output directory")->required();
    ana->add_option("--config", config_path, "run configuration (analysis section)");
    add_common(ana);

    CLI11_PARSE(app, argc, argv);

    try {
        std::optional<std::filesystem::path> cfg;
        if (!config_path.empty()) cfg = config_path;
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, flags);
        if (scan->parsed()) return cmd_scan_scales(container_dir, out_dir, cfg, flags);
        if (rec->parsed()) return cmd_reconstruct(container_dir, hypotheses_path, out_dir, cfg, flags);
        if (ana->parsed()) return cmd_analyze(state_dir, mode, out_dir, cfg, flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
