#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pnlos/errors.hpp"
#include "pnlos/field.hpp"
#include "pnlos/propagate.hpp"
#include "pnlos/random.hpp"
#include "pnlos/registration.hpp"
#include "pnlos/scene.hpp"
#include "pnlos/shift.hpp"
#include "pnlos/shift_recovery.hpp"
#include "pnlos/tv.hpp"

namespace pnlos {

enum class FrameOrder { Sequential, Shuffled };

/// Solver knobs. epsilon_rel scales the division guard by the peak measured
/// intensity at run start; gamma and beta are the layer and surface update
/// step sizes.
struct ReconConfig {
    int epochs = 60;
    double gamma = 1.0;
    double beta = 1.0;
    double epsilon_rel = 1e-6;
    double tv_weight = 0.0;
    int tv_inner_steps = 20;
    FrameOrder frame_order = FrameOrder::Shuffled;
    uint64_t order_seed = 1234;

    void validate() const {
        if (epochs < 0) throw std::invalid_argument("ReconConfig: epochs must be >= 0");
        if (!(gamma >= 0.0 && gamma <= 2.0) || !(beta >= 0.0 && beta <= 2.0))
            throw std::invalid_argument("ReconConfig: step sizes must lie in [0, 2]");
        if (!(epsilon_rel > 0.0))
            throw std::invalid_argument("ReconConfig: epsilon_rel must be positive");
        if (tv_weight < 0.0) throw std::invalid_argument("ReconConfig: tv_weight must be >= 0");
    }
};

struct ReconLayer {
    ComplexField wavefield;  // W_j estimate at the wall
    LayerHypothesis hypothesis;
    std::optional<double> depth_estimate;
};

/// Joint estimate of the coded surface and all layer wavefields, plus the
/// per-epoch normalized data misfit history.
struct ReconState {
    ComplexField cs;
    std::vector<ReconLayer> layers;
    int epoch = 0;
    std::vector<double> residual_history;
    double epsilon_abs = 0.0;
    double defocus = 0.0;
};

/// Per-frame sensor-plane mixture components and the bookkeeping needed to
/// apply the frame update without recomputation.
struct FrameWavefields {
    std::vector<ComplexField> shifted;  // shift(W_j) at the wall, pre-update
    std::vector<ComplexField> exit;     // shift(W_j) * CS
    std::vector<ComplexField> psi;      // sensor-plane components
    IntensityFrame combined;            // sum_j |psi_j|^2
};

/**
 * Initial estimates per the recovery flow: each layer wavefield is the
 * square root of its shift-and-add composite divided by the layer count
 * (zero phase); the coded surface is the square root of the mean frame
 * normalized to unit mean modulus (zero phase).
 */
inline ReconState initialize_state(const Ptychogram& gram,
                                   const std::vector<LayerHypothesis>& hypotheses) {
    gram.validate();
    if (hypotheses.empty()) throw std::invalid_argument("initialize_state: no hypotheses");
    const int h = gram.frames.front().height();
    const int w = gram.frames.front().width();
    const double inv_layers = 1.0 / static_cast<double>(hypotheses.size());

    ReconState state{ComplexField(h, w, gram.meta.pitch, gram.meta.wavelength), {}, 0, {}, 0.0,
                     gram.meta.defocus_d};

    for (const LayerHypothesis& hyp : hypotheses) {
        const IntensityFrame composite = shift_and_add(gram.frames, hyp.shifts_px);
        ComplexField wavefield(h, w, gram.meta.pitch, gram.meta.wavelength);
        for (size_t k = 0; k < composite.size(); ++k)
            wavefield.samples()[k] = cplx{std::sqrt(composite.samples()[k]) * inv_layers, 0.0};
        state.layers.push_back(ReconLayer{std::move(wavefield), hyp, std::nullopt});
    }

    std::vector<double> mean(static_cast<size_t>(h) * w, 0.0);
    const double inv_n = 1.0 / static_cast<double>(gram.frames.size());
    for (const auto& frame : gram.frames)
        for (size_t k = 0; k < mean.size(); ++k) mean[k] += frame.samples()[k] * inv_n;
    double mean_modulus = 0.0;
    for (size_t k = 0; k < mean.size(); ++k) {
        mean[k] = std::sqrt(mean[k]);
        mean_modulus += mean[k];
    }
    mean_modulus /= static_cast<double>(mean.size());
    const double scale = mean_modulus > 0.0 ? 1.0 / mean_modulus : 1.0;
    for (size_t k = 0; k < mean.size(); ++k) state.cs.samples()[k] = cplx{mean[k] * scale, 0.0};
    return state;
}

/// Forward model for one frame: psi_j = propagate(shift(W_j) * CS, d).
inline FrameWavefields forward_frame(const ReconState& state, const Ptychogram& gram,
                                     int frame_index) {
    const int h = state.cs.height();
    const int w = state.cs.width();
    FrameWavefields fw{{}, {}, {}, IntensityFrame(h, w, state.cs.pitch())};
    for (const ReconLayer& layer : state.layers) {
        const auto& s = layer.hypothesis.shifts_px[frame_index];
        ComplexField shifted = shift_field(layer.wavefield, s[0], s[1]);
        ComplexField exit = shifted;
        auto& ed = exit.samples();
        const auto& cd = state.cs.samples();
        for (size_t k = 0; k < ed.size(); ++k) ed[k] *= cd[k];
        ComplexField psi = state.defocus != 0.0 ? propagate(exit, state.defocus) : exit;
        auto& acc = fw.combined.samples();
        const auto& pd = psi.samples();
        for (size_t k = 0; k < acc.size(); ++k) acc[k] += std::norm(pd[k]);
        fw.shifted.push_back(std::move(shifted));
        fw.exit.push_back(std::move(exit));
        fw.psi.push_back(std::move(psi));
    }
    return fw;
}

/**
 * Magnitude projection for an incoherent mixture: every component is
 * rescaled by the shared factor sqrt(I_meas / (I_est + epsilon)), keeping
 * per-component phase and making the summed intensity match the measurement
 * wherever the estimate dominates the guard.
 */
inline FrameWavefields magnitude_project(const FrameWavefields& fw, const IntensityFrame& measured,
                                         double epsilon_div) {
    if (!(epsilon_div > 0.0))
        throw std::invalid_argument("magnitude_project: epsilon_div must be positive");
    if (!measured.same_grid(fw.combined))
        throw std::invalid_argument("magnitude_project: frame shape mismatch");
    FrameWavefields out = fw;
    const auto& est = fw.combined.samples();
    const auto& meas = measured.samples();
    std::vector<double> correction(est.size());
    for (size_t k = 0; k < est.size(); ++k)
        correction[k] = std::sqrt(meas[k] / (est[k] + epsilon_div));
    for (ComplexField& psi : out.psi) {
        auto& pd = psi.samples();
        for (size_t k = 0; k < pd.size(); ++k) pd[k] *= correction[k];
    }
    return out;
}

/**
 * ePIE-form joint update from one projected frame. Every back-propagated
 * component yields an exit-wave error Delta_j; the shifted layer estimates
 * and the coded surface absorb it with conjugate-weighted steps, all
 * right-hand sides taken at the pre-update values (Jacobi within a frame,
 * so the per-frame result does not depend on layer order).
 */
inline void update_frame(ReconState& state, int frame_index, const FrameWavefields& projected,
                         double gamma, double beta) {
    const size_t layer_count = state.layers.size();
    if (projected.psi.size() != layer_count)
        throw std::invalid_argument("update_frame: component count mismatch");
    if (gamma == 0.0 && beta == 0.0) return;

    double max_cs_sq = 0.0;
    for (const cplx& v : state.cs.samples()) max_cs_sq = std::max(max_cs_sq, std::norm(v));
    double max_w_sq = 0.0;
    for (const ComplexField& sw : projected.shifted)
        for (const cplx& v : sw.samples()) max_w_sq = std::max(max_w_sq, std::norm(v));
    if (gamma > 0.0 && max_cs_sq == 0.0)
        throw NumericalError("update_frame: degenerate state, coded surface is identically zero");
    if (beta > 0.0 && max_w_sq == 0.0)
        throw NumericalError("update_frame: degenerate state, all layer wavefields are zero");

    const size_t n = state.cs.size();
    std::vector<cplx> cs_delta(beta > 0.0 ? n : 0, cplx{0.0, 0.0});
    const auto& cs = state.cs.samples();

    for (size_t j = 0; j < layer_count; ++j) {
        ComplexField back = state.defocus != 0.0 ? propagate(projected.psi[j], -state.defocus)
                                                 : projected.psi[j];
        auto& delta = back.samples();  // becomes Delta_j in place
        const auto& exit = projected.exit[j].samples();
        for (size_t k = 0; k < n; ++k) delta[k] -= exit[k];

        if (beta > 0.0) {
            const auto& sw = projected.shifted[j].samples();
            for (size_t k = 0; k < n; ++k) cs_delta[k] += std::conj(sw[k]) * delta[k];
        }
        if (gamma > 0.0) {
            ComplexField update = ComplexField::like(back);
            auto& ud = update.samples();
            const double step = gamma / max_cs_sq;
            for (size_t k = 0; k < n; ++k) ud[k] = step * std::conj(cs[k]) * delta[k];
            const auto& s = state.layers[j].hypothesis.shifts_px[frame_index];
            const ComplexField unshifted = shift_field(update, -s[0], -s[1]);
            auto& wd = state.layers[j].wavefield.samples();
            const auto& un = unshifted.samples();
            for (size_t k = 0; k < n; ++k) wd[k] += un[k];
        }
    }
    if (beta > 0.0) {
        auto& cd = state.cs.samples();
        const double step = beta / max_w_sq;
        for (size_t k = 0; k < n; ++k) cd[k] += step * cs_delta[k];
    }
}

struct ConvergenceReport {
    std::vector<double> residual_history;
    int epochs_run = 0;
};

/**
 * Full depth-multiplexed reconstruction: epochs of
 * forward -> magnitude projection -> joint update over all frames, with the
 * per-epoch L1-normalized data misfit recorded before each frame's update.
 * After every epoch the coded surface is rescaled to unit mean modulus and
 * the layer wavefields absorb the inverse factor (the global scale between
 * them is unobservable). Deterministic for a fixed config.
 */
inline std::pair<ReconState, ConvergenceReport> run_reconstruction(
    const Ptychogram& gram, const std::vector<LayerHypothesis>& hypotheses,
    const ReconConfig& config) {
    config.validate();
    ReconState state = initialize_state(gram, hypotheses);

    double peak = 0.0, total_l1 = 0.0;
    for (const auto& frame : gram.frames)
        for (double v : frame.samples()) {
            peak = std::max(peak, v);
            total_l1 += std::abs(v);
        }
    state.epsilon_abs = std::max(config.epsilon_rel * peak, 1e-300);
    if (total_l1 <= 0.0) throw NumericalError("run_reconstruction: measurements are all zero");

    const int n = static_cast<int>(gram.frames.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    auto rng = make_rng(config.order_seed);

    ConvergenceReport report;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.frame_order == FrameOrder::Shuffled) std::shuffle(order.begin(), order.end(), rng);
        double misfit = 0.0;
        for (int idx = 0; idx < n; ++idx) {
            const int i = order[idx];
            const FrameWavefields fw = forward_frame(state, gram, i);
            const auto& est = fw.combined.samples();
            const auto& meas = gram.frames[i].samples();
            for (size_t k = 0; k < est.size(); ++k) misfit += std::abs(est[k] - meas[k]);
            const FrameWavefields projected = magnitude_project(fw, gram.frames[i], state.epsilon_abs);
            update_frame(state, i, projected, config.gamma, config.beta);

            for (const cplx& v : state.cs.samples())
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                    throw NumericalError("run_reconstruction: NaN in coded surface at epoch " +
                                         std::to_string(epoch) + ", frame " + std::to_string(i));
            for (const auto& layer : state.layers)
                for (const cplx& v : layer.wavefield.samples())
                    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                        throw NumericalError("run_reconstruction: NaN in layer wavefield at epoch " +
                                             std::to_string(epoch) + ", frame " + std::to_string(i));
        }
        state.residual_history.push_back(misfit / total_l1);
        state.epoch = epoch + 1;

        double mean_modulus = 0.0;
        for (const cplx& v : state.cs.samples()) mean_modulus += std::abs(v);
        mean_modulus /= static_cast<double>(state.cs.size());
        if (mean_modulus > 0.0 && mean_modulus != 1.0) {
            const double inv = 1.0 / mean_modulus;
            for (cplx& v : state.cs.samples()) v *= inv;
            for (auto& layer : state.layers)
                for (cplx& v : layer.wavefield.samples()) v *= mean_modulus;
        }
    }
    report.residual_history = state.residual_history;
    report.epochs_run = state.epoch;
    return {std::move(state), std::move(report)};
}

/**
 * Object recovery from a wall wavefield: back-propagation to the object
 * plane, optionally regularized by alternating a data-consistency blend
 * with proximal total-variation smoothing of the modulus (phase kept).
 * tv_weight zero reduces exactly to plain back-propagation.
 */
inline ComplexField recover_object(const ComplexField& wall_field, double depth, double tv_weight,
                                   int tv_inner_steps) {
    if (!(depth > 0.0)) throw std::invalid_argument("recover_object: depth must be positive");
    ComplexField backprop = propagate(wall_field, -depth);
    if (tv_weight <= 0.0) return backprop;

    const int h = backprop.height();
    const int w = backprop.width();
    const int outer_steps = 8;
    const double blend = 0.5;
    ComplexField obj = backprop;
    for (int step = 0; step < outer_steps; ++step) {
        auto& od = obj.samples();
        const auto& bd = backprop.samples();
        for (size_t k = 0; k < od.size(); ++k) od[k] += blend * (bd[k] - od[k]);

        std::vector<double> modulus(od.size());
        for (size_t k = 0; k < od.size(); ++k) modulus[k] = std::abs(od[k]);
        const std::vector<double> smoothed = tv_prox(modulus, h, w, tv_weight, tv_inner_steps);
        for (size_t k = 0; k < od.size(); ++k) {
            const double m = modulus[k];
            od[k] = m > 0.0 ? od[k] * (std::max(0.0, smoothed[k]) / m)
                            : cplx{std::max(0.0, smoothed[k]), 0.0};
        }
    }
    return obj;
}

/// Scale- and phase-invariant recovery fidelity: normalized cross-correlation
/// between the moduli after the best circular registration shift.
inline double recovery_fidelity(const ComplexField& recovered, const ComplexField& reference) {
    std::vector<double> a(recovered.size()), b(reference.size());
    for (size_t k = 0; k < a.size(); ++k) a[k] = std::abs(recovered.samples()[k]);
    for (size_t k = 0; k < b.size(); ++k) b[k] = std::abs(reference.samples()[k]);
    return registered_correlation(b, a, reference.height(), reference.width());
}

} // namespace pnlos
