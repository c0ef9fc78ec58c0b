#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pnlos/coded_surface.hpp"
#include "pnlos/recon.hpp"
#include "pnlos/simulate.hpp"
#include "pnlos/targets.hpp"
#include "pnlos/tv.hpp"

#include "test_helpers.hpp"

using namespace pnlos;
using pnlos::testing::rms_difference;
using pnlos::testing::smooth_random;

namespace {
constexpr double kWavelength = 532e-9;
constexpr double kPitch = 8e-6;

ObjectLayer bars_layer(double depth, double linewidth_px, double rough_phase = 1.5) {
    TargetParams p;
    p.pitch = kPitch;
    p.wavelength = kWavelength;
    p.linewidths = {linewidth_px * kPitch};
    ComplexField reflectance = make_test_target("usaf_bars", p);
    if (rough_phase > 0.0) reflectance = roughen_surface(reflectance, rough_phase, 2.0, 61);
    return ObjectLayer{std::move(reflectance), depth, {0.0, 0.0}};
}

struct SmallScene {
    Ptychogram gram;
    SimulationRecord record;
};

SmallScene make_scene(int n, int traj_side, double cs_phase, uint64_t seed,
                      double photon_scale = 0.0) {
    const ScanTrajectory traj = ScanTrajectory::raster(traj_side, traj_side, 0.2e-3, 0.2e-3);
    AcquisitionMeta meta{0.75e-3, kWavelength, kPitch, {photon_scale, 0.0, 0}};
    const CodedSurface cs =
        synthesize_coded_surface(7, n, n, kPitch, kWavelength, 4 * kPitch, 0.7, 1.0, cs_phase);
    auto [gram, record] = simulate_ptychogram({bars_layer(0.02, 4)}, cs, traj, meta,
                                              Geometry{0.05, 0.4}, seed);
    return SmallScene{std::move(gram), std::move(record)};
}

std::vector<LayerHypothesis> truth_hypotheses(const SimulationRecord& record) {
    std::vector<LayerHypothesis> hyps;
    for (const auto& layer : record.layers)
        hyps.push_back(LayerHypothesis{layer.alpha, layer.shifts_px, {}, 0});
    return hyps;
}

/// Ground-truth state with the coded surface rescaled to unit mean modulus
/// (and the wavefields absorbing the inverse), which leaves the forward
/// model untouched.
ReconState truth_state(const SmallScene& scene) {
    ReconState state{scene.record.cs.profile, {}, 0, {}, 1e-20, scene.gram.meta.defocus_d};
    double mean = 0.0;
    for (const auto& v : state.cs.samples()) mean += std::abs(v);
    mean /= static_cast<double>(state.cs.size());
    for (auto& v : state.cs.samples()) v /= mean;
    for (const auto& layer : scene.record.layers) {
        ComplexField w = layer.wall_field;
        for (auto& v : w.samples()) v *= mean;
        state.layers.push_back(
            ReconLayer{std::move(w), LayerHypothesis{layer.alpha, layer.shifts_px, {}, 0}, {}});
    }
    return state;
}

double state_misfit(const ReconState& state, const Ptychogram& gram) {
    double misfit = 0.0, total = 0.0;
    for (size_t i = 0; i < gram.frames.size(); ++i) {
        const FrameWavefields fw = forward_frame(state, gram, static_cast<int>(i));
        for (size_t k = 0; k < fw.combined.size(); ++k) {
            misfit += std::abs(fw.combined.samples()[k] - gram.frames[i].samples()[k]);
            total += gram.frames[i].samples()[k];
        }
    }
    return misfit / total;
}
} // namespace

TEST_CASE("initialize_state on constant frames") {
    const double c = 4.0;
    Ptychogram gram;
    gram.trajectory = ScanTrajectory::raster(2, 2, 1e-4, 1e-4);
    gram.meta = AcquisitionMeta{0.75e-3, kWavelength, kPitch, {}};
    for (int i = 0; i < 4; ++i) gram.frames.emplace_back(16, 16, kPitch, c);

    LayerHypothesis hyp;
    hyp.alpha = 0.5;
    hyp.shifts_px.assign(4, {0.0, 0.0});

    const ReconState single = initialize_state(gram, {hyp});
    for (const auto& v : single.layers[0].wavefield.samples())
        CHECK(std::abs(v) == Catch::Approx(std::sqrt(c)).margin(1e-12));
    for (const auto& v : single.cs.samples())
        CHECK(std::abs(v) == Catch::Approx(1.0).margin(1e-12));

    const ReconState both = initialize_state(gram, {hyp, hyp});
    for (const auto& v : both.layers[0].wavefield.samples())
        CHECK(std::abs(v) == Catch::Approx(0.5 * std::sqrt(c)).margin(1e-12));
    CHECK(rms_difference(both.layers[0].wavefield, both.layers[1].wavefield) == 0.0);
}

TEST_CASE("initialize_state forward residual is finite") {
    const SmallScene scene = make_scene(64, 2, 2.0, 5);
    const ReconState init = initialize_state(scene.gram, truth_hypotheses(scene.record));
    const double misfit = state_misfit(init, scene.gram);
    CHECK(std::isfinite(misfit));
    CHECK(misfit >= 0.0);
}

TEST_CASE("forward_frame identity special case") {
    Ptychogram gram;
    gram.trajectory = ScanTrajectory::raster(2, 2, 1e-4, 1e-4);
    gram.meta = AcquisitionMeta{0.75e-3, kWavelength, kPitch, {}};
    for (int i = 0; i < 4; ++i) gram.frames.emplace_back(32, 32, kPitch, 1.0);

    std::mt19937_64 rng(4);
    ReconState state{ComplexField(32, 32, kPitch, kWavelength, cplx{1.0, 0.0}), {}, 0, {}, 1e-12,
                     0.0};  // defocus zero, CS identically one
    LayerHypothesis hyp;
    hyp.shifts_px.assign(4, {0.0, 0.0});
    state.layers.push_back(ReconLayer{smooth_random(32, 32, kPitch, kWavelength, 6, rng), hyp, {}});

    const FrameWavefields fw = forward_frame(state, gram, 0);
    CHECK(rms_difference(fw.psi[0], state.layers[0].wavefield) == 0.0);

    // doubling CS doubles every component
    ReconState doubled = state;
    for (auto& v : doubled.cs.samples()) v *= 2.0;
    const FrameWavefields fw2 = forward_frame(doubled, gram, 0);
    for (size_t k = 0; k < fw.psi[0].size(); ++k)
        CHECK(std::abs(fw2.psi[0].samples()[k] - 2.0 * fw.psi[0].samples()[k]) < 1e-12);
}

TEST_CASE("forward_frame reproduces ground-truth frames") {
    const SmallScene scene = make_scene(64, 2, 2.0, 9);
    const ReconState state = truth_state(scene);
    for (size_t i = 0; i < scene.gram.frames.size(); ++i) {
        const FrameWavefields fw = forward_frame(state, scene.gram, static_cast<int>(i));
        double err = 0.0, ref = 0.0;
        for (size_t k = 0; k < fw.combined.size(); ++k) {
            err += std::abs(fw.combined.samples()[k] - scene.gram.frames[i].samples()[k]);
            ref += scene.gram.frames[i].samples()[k];
        }
        CHECK(err / ref < 1e-8);
    }
}

TEST_CASE("magnitude_project rescales the mixture") {
    std::mt19937_64 rng(12);
    const int n = 32;
    Ptychogram gram;
    gram.trajectory = ScanTrajectory::raster(2, 2, 1e-4, 1e-4);
    gram.meta = AcquisitionMeta{0.5e-3, kWavelength, kPitch, {}};
    for (int i = 0; i < 4; ++i) gram.frames.emplace_back(n, n, kPitch, 1.0);

    ReconState state{ComplexField(n, n, kPitch, kWavelength, cplx{1.0, 0.0}), {}, 0, {}, 1e-12,
                     gram.meta.defocus_d};
    LayerHypothesis hyp;
    hyp.shifts_px.assign(4, {0.0, 0.0});
    state.layers.push_back(ReconLayer{smooth_random(n, n, kPitch, kWavelength, 5, rng), hyp, {}});
    state.layers.push_back(ReconLayer{smooth_random(n, n, kPitch, kWavelength, 5, rng), hyp, {}});

    const FrameWavefields fw = forward_frame(state, gram, 0);

    // fixed point: measured equals estimate
    const FrameWavefields same = magnitude_project(fw, fw.combined, 1e-15);
    for (size_t j = 0; j < fw.psi.size(); ++j)
        CHECK(rms_difference(same.psi[j], fw.psi[j]) < 1e-7);

    // single component, 4x measurement doubles the modulus, keeps phase
    IntensityFrame four(n, n, kPitch);
    for (size_t k = 0; k < four.size(); ++k) four.samples()[k] = 4.0 * fw.combined.samples()[k];
    const FrameWavefields twice = magnitude_project(fw, four, 1e-18);
    for (size_t k = 0; k < twice.psi[0].size(); ++k) {
        const cplx a = twice.psi[0].samples()[k];
        const cplx b = fw.psi[0].samples()[k];
        CHECK(std::abs(a - 2.0 * b) < 1e-6 * (1.0 + std::abs(b)));
    }

    // random measurement: mixture intensity matches wherever the estimate
    // dominates the guard
    std::uniform_real_distribution<double> uni(0.5, 2.0);
    IntensityFrame random(n, n, kPitch);
    for (double& v : random.samples()) v = uni(rng);
    const double eps = 1e-9;
    const FrameWavefields proj = magnitude_project(fw, random, eps);
    for (size_t k = 0; k < random.size(); ++k) {
        if (fw.combined.samples()[k] <= 1e3 * eps) continue;
        double total = 0.0;
        for (const auto& psi : proj.psi) total += std::norm(psi.samples()[k]);
        CHECK(total == Catch::Approx(random.samples()[k]).epsilon(1e-6));
    }
}

TEST_CASE("update_frame leaves a consistent state untouched") {
    const SmallScene scene = make_scene(64, 2, 2.0, 21);
    ReconState state = truth_state(scene);
    const ReconState before = state;

    // zero exit-wave error: projected equals the forward pass
    const FrameWavefields fw = forward_frame(state, scene.gram, 1);
    update_frame(state, 1, fw, 1.0, 1.0);
    CHECK(rms_difference(state.cs, before.cs) < 1e-10);
    CHECK(rms_difference(state.layers[0].wavefield, before.layers[0].wavefield) < 1e-10);

    // zero step sizes
    const FrameWavefields projected = magnitude_project(fw, scene.gram.frames[1], 1e-9);
    update_frame(state, 1, projected, 0.0, 0.0);
    CHECK(rms_difference(state.cs, before.cs) < 1e-10);
    CHECK(rms_difference(state.layers[0].wavefield, before.layers[0].wavefield) < 1e-10);
}

TEST_CASE("update_frame reduces the misfit of a single frame") {
    const SmallScene scene = make_scene(64, 2, 2.0, 33);
    ReconState state = truth_state(scene);
    std::mt19937_64 rng(77);
    state.layers[0].wavefield = smooth_random(64, 64, kPitch, kWavelength, 8, rng);
    state.epsilon_abs = 1e-9;

    auto frame_misfit = [&](int i) {
        const FrameWavefields fw = forward_frame(state, scene.gram, i);
        double acc = 0.0;
        for (size_t k = 0; k < fw.combined.size(); ++k)
            acc += std::abs(fw.combined.samples()[k] - scene.gram.frames[i].samples()[k]);
        return acc;
    };

    const double before = frame_misfit(0);
    const FrameWavefields fw = forward_frame(state, scene.gram, 0);
    const FrameWavefields projected = magnitude_project(fw, scene.gram.frames[0], state.epsilon_abs);
    update_frame(state, 0, projected, 1.0, 0.0);  // surface frozen
    CHECK(frame_misfit(0) < before);
}

TEST_CASE("update_frame rejects degenerate states") {
    const SmallScene scene = make_scene(64, 2, 2.0, 40);
    ReconState state = truth_state(scene);
    for (auto& v : state.cs.samples()) v = cplx{0.0, 0.0};
    const FrameWavefields fw = forward_frame(state, scene.gram, 0);
    CHECK_THROWS_AS(update_frame(state, 0, fw, 1.0, 0.0), NumericalError);
}

TEST_CASE("run_reconstruction with zero epochs returns the initialization") {
    const SmallScene scene = make_scene(64, 2, 2.0, 13);
    const auto hyps = truth_hypotheses(scene.record);
    ReconConfig config;
    config.epochs = 0;
    auto [state, report] = run_reconstruction(scene.gram, hyps, config);
    const ReconState init = initialize_state(scene.gram, hyps);
    CHECK(report.epochs_run == 0);
    CHECK(state.residual_history.empty());
    CHECK(rms_difference(state.cs, init.cs) == 0.0);
    CHECK(rms_difference(state.layers[0].wavefield, init.layers[0].wavefield) == 0.0);
}

TEST_CASE("ground truth is a fixed point of a full epoch") {
    const SmallScene scene = make_scene(64, 3, 2.0, 17);
    ReconState state = truth_state(scene);
    const ReconState before = state;
    state.epsilon_abs = 1e-15;  // vanishing guard so the projection is exact

    for (size_t i = 0; i < scene.gram.frames.size(); ++i) {
        const FrameWavefields fw = forward_frame(state, scene.gram, static_cast<int>(i));
        const FrameWavefields projected =
            magnitude_project(fw, scene.gram.frames[i], state.epsilon_abs);
        update_frame(state, static_cast<int>(i), projected, 1.0, 1.0);
    }
    CHECK(rms_difference(state.cs, before.cs) < 1e-8);
    CHECK(rms_difference(state.layers[0].wavefield, before.layers[0].wavefield) < 1e-8);
}

TEST_CASE("residual history trends down on a noiseless scene") {
    const SmallScene scene = make_scene(64, 3, 2.0, 29);
    ReconConfig config;
    config.epochs = 10;
    config.frame_order = FrameOrder::Sequential;
    auto [state, report] = run_reconstruction(scene.gram, truth_hypotheses(scene.record), config);
    REQUIRE(report.residual_history.size() == 10);
    for (size_t e = 1; e < report.residual_history.size(); ++e)
        CHECK(report.residual_history[e] <= report.residual_history[e - 1] * 1.01);
    CHECK(report.residual_history.back() < report.residual_history.front());
}

TEST_CASE("recover_object with zero weight is plain back-propagation") {
    std::mt19937_64 rng(31);
    const ComplexField w = smooth_random(64, 64, kPitch, kWavelength, 6, rng);
    const ComplexField plain = propagate(w, -0.35);
    const ComplexField out = recover_object(w, 0.35, 0.0, 10);
    CHECK(rms_difference(out, plain) == 0.0);
}

TEST_CASE("recover_object TV smoothing never raises total variation") {
    const SmallScene scene = make_scene(64, 2, 2.0, 43);
    const ComplexField& w = scene.record.layers[0].wall_field;
    const double depth = scene.record.layers[0].depth;

    const ComplexField plain = recover_object(w, depth, 0.0, 0);
    const ComplexField smoothed = recover_object(w, depth, 5e-3, 20);

    auto modulus = [](const ComplexField& f) {
        std::vector<double> m(f.size());
        for (size_t k = 0; k < f.size(); ++k) m[k] = std::abs(f.samples()[k]);
        return m;
    };
    const double tv_plain = tv_anisotropic(modulus(plain), plain.height(), plain.width());
    const double tv_smooth = tv_anisotropic(modulus(smoothed), plain.height(), plain.width());
    CHECK(tv_smooth <= tv_plain * (1.0 + 1e-9));
}

TEST_CASE("recover_object TV does not degrade a noisy reconstruction") {
    // strong shot noise so denoising has something to remove
    const SmallScene scene = make_scene(96, 3, 2.0, 47, 1000.0);
    ReconConfig config;
    config.epochs = 20;
    auto [state, report] = run_reconstruction(scene.gram, truth_hypotheses(scene.record), config);

    const double depth = scene.record.layers[0].depth;
    const ComplexField plain = recover_object(state.layers[0].wavefield, depth, 0.0, 0);
    const ComplexField denoised = recover_object(state.layers[0].wavefield, depth, 1e-3, 20);
    const double f_plain = recovery_fidelity(plain, scene.record.layers[0].object_field);
    const double f_denoised = recovery_fidelity(denoised, scene.record.layers[0].object_field);
    CHECK(f_denoised >= f_plain - 1e-6);
}

TEST_CASE("data-consistency gradient matches finite differences") {
    std::mt19937_64 rng(53);
    const int n = 16;
    const double z = 0.5e-3;
    const ComplexField obj = smooth_random(n, n, kPitch, kWavelength, 4, rng);
    const ComplexField target = smooth_random(n, n, kPitch, kWavelength, 4, rng);

    auto objective = [&](const ComplexField& o) {
        const ComplexField fwd = propagate(o, z);
        double acc = 0.0;
        for (size_t k = 0; k < fwd.size(); ++k) acc += std::norm(fwd.samples()[k] - target.samples()[k]);
        return acc;
    };

    // Wirtinger gradient: d J / d conj(O) = P^H (P O - W)
    ComplexField residual = propagate(obj, z);
    for (size_t k = 0; k < residual.size(); ++k) residual.samples()[k] -= target.samples()[k];
    const ComplexField grad = propagate(residual, -z);

    const double eps = 1e-6;
    std::uniform_int_distribution<int> pick(0, n * n - 1);
    for (int trial = 0; trial < 8; ++trial) {
        const int k = pick(rng);
        ComplexField plus = obj, minus = obj;
        plus.samples()[k] += eps;
        minus.samples()[k] -= eps;
        const double fd_re = (objective(plus) - objective(minus)) / (2.0 * eps);
        const double an_re = 2.0 * grad.samples()[k].real();
        CHECK(fd_re == Catch::Approx(an_re).epsilon(1e-4).margin(1e-8));

        plus = obj;
        minus = obj;
        plus.samples()[k] += cplx{0.0, eps};
        minus.samples()[k] -= cplx{0.0, eps};
        const double fd_im = (objective(plus) - objective(minus)) / (2.0 * eps);
        const double an_im = 2.0 * grad.samples()[k].imag();
        CHECK(fd_im == Catch::Approx(an_im).epsilon(1e-4).margin(1e-8));
    }
}
