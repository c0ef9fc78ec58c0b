#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pnlos/coded_surface.hpp"
#include "pnlos/depth.hpp"
#include "pnlos/simulate.hpp"
#include "pnlos/targets.hpp"

using namespace pnlos;

namespace {
constexpr double kWavelength = 532e-9;
constexpr double kPitch = 16e-6;

/// Random large dots over a band; textured enough for the Brenner metric at
/// desk-scale band limits.
ComplexField dot_texture(int h, int w, uint64_t seed, int dot_radius, int dots) {
    ComplexField field(h, w, kPitch, kWavelength);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> ry(dot_radius, h - dot_radius - 1);
    std::uniform_int_distribution<int> rx(dot_radius, w - dot_radius - 1);
    for (int d = 0; d < dots; ++d) {
        const int cy = ry(rng), cx = rx(rng);
        for (int y = -dot_radius; y <= dot_radius; ++y)
            for (int x = -dot_radius; x <= dot_radius; ++x)
                if (y * y + x * x <= dot_radius * dot_radius)
                    field.at(cy + y, cx + x) = cplx{1.0, 0.0};
    }
    return field;
}

/// Wall field of a staircase object: each horizontal span of the texture is
/// propagated from its own depth.
ComplexField staircase_wall(const ComplexField& texture, const std::vector<int>& edges,
                            const std::vector<double>& depths) {
    ComplexField wall = ComplexField::like(texture);
    for (size_t s = 0; s + 1 < edges.size(); ++s) {
        ComplexField strip = ComplexField::like(texture);
        for (int y = 0; y < texture.height(); ++y)
            for (int x = edges[s]; x < edges[s + 1]; ++x) strip.at(y, x) = texture.at(y, x);
        const ComplexField arrived = propagate(strip, depths[s]);
        for (size_t k = 0; k < wall.size(); ++k) wall.samples()[k] += arrived.samples()[k];
    }
    return wall;
}
} // namespace

TEST_CASE("segment grid covers the field") {
    const SegmentGrid segments{3, 6, 0.2};
    segments.validate();
    const int h = 96, w = 192;
    std::vector<int> covered(static_cast<size_t>(h) * w, 0);
    for (int r = 0; r < segments.rows; ++r)
        for (int c = 0; c < segments.cols; ++c) {
            const auto rect = segments.core(r, c, h, w);
            for (int y = rect.y0; y < rect.y1; ++y)
                for (int x = rect.x0; x < rect.x1; ++x) ++covered[static_cast<size_t>(y) * w + x];
        }
    for (int v : covered) CHECK(v == 1);

    CHECK_THROWS_AS((SegmentGrid{0, 3, 0.2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SegmentGrid{2, 2, 0.6}.validate()), std::invalid_argument);
}

TEST_CASE("refocus_sweep finds a flat object depth") {
    const int n = 192;
    const double z_true = 0.46;
    ComplexField texture = dot_texture(n, n, 3, 5, 60);
    const ComplexField wall = propagate(texture, z_true);

    const SegmentGrid segments{2, 2, 0.1};
    const DepthSweepResult sweep = refocus_sweep(wall, segments, 0.44, 0.48, 0.001);
    REQUIRE(static_cast<int>(sweep.best_depth.size()) == segments.count());
    for (const auto& depth : sweep.best_depth) {
        REQUIRE(depth.has_value());
        CHECK(std::abs(*depth - z_true) <= 0.001 + 1e-12);
    }
    for (const auto& curve : sweep.brenner)
        for (double v : curve) CHECK(v >= 0.0);
}

TEST_CASE("refocus_sweep flags a uniform field as undefined") {
    ComplexField uniform(64, 64, kPitch, kWavelength, cplx{1.0, 0.0});
    const DepthSweepResult sweep = refocus_sweep(uniform, SegmentGrid{2, 2, 0.0}, 0.44, 0.46, 0.005);
    for (const auto& depth : sweep.best_depth) CHECK_FALSE(depth.has_value());
}

TEST_CASE("refocus_sweep Brenner curves ignore a global phase") {
    const int n = 96;
    const ComplexField wall = propagate(dot_texture(n, n, 5, 5, 30), 0.45);
    ComplexField rotated = wall;
    const cplx phase{std::cos(1.1), std::sin(1.1)};
    for (auto& v : rotated.samples()) v *= phase;

    const SegmentGrid segments{1, 2, 0.0};
    const DepthSweepResult a = refocus_sweep(wall, segments, 0.44, 0.46, 0.002);
    const DepthSweepResult b = refocus_sweep(rotated, segments, 0.44, 0.46, 0.002);
    for (int s = 0; s < segments.count(); ++s)
        for (size_t k = 0; k < a.brenner[s].size(); ++k)
            CHECK(a.brenner[s][k] == Catch::Approx(b.brenner[s][k]).epsilon(1e-9));
}

TEST_CASE("best depth is invariant under intensity gain") {
    const int n = 96;
    const ComplexField wall = propagate(dot_texture(n, n, 7, 5, 30), 0.455);
    ComplexField scaled = wall;
    for (auto& v : scaled.samples()) v *= 3.0;

    const SegmentGrid segments{1, 1, 0.0};
    const DepthSweepResult a = refocus_sweep(wall, segments, 0.44, 0.47, 0.001);
    const DepthSweepResult b = refocus_sweep(scaled, segments, 0.44, 0.47, 0.001);
    REQUIRE(a.best_depth[0].has_value());
    REQUIRE(b.best_depth[0].has_value());
    CHECK(*a.best_depth[0] == Catch::Approx(*b.best_depth[0]).margin(1e-9));
    // Brenner scales by the fourth power of an amplitude gain
    CHECK(b.brenner[0][0] == Catch::Approx(81.0 * a.brenner[0][0]).epsilon(1e-9));
}

TEST_CASE("staircase object yields monotone segment depths") {
    const int n = 192;
    const SegmentGrid segments{1, 6, 0.0};
    std::vector<int> edges;
    for (int c = 0; c <= 6; ++c) edges.push_back(segments.core(0, c % 6, n, n).x0);
    edges[6] = n;
    std::vector<double> depths{0.450, 0.456, 0.462, 0.468, 0.474, 0.480};
    const ComplexField texture = dot_texture(n, n, 11, 5, 90);
    const ComplexField wall = staircase_wall(texture, edges, depths);

    const DepthSweepResult sweep = refocus_sweep(wall, segments, 0.44, 0.49, 0.001);
    for (int s = 0; s < 6; ++s) {
        REQUIRE(sweep.best_depth[s].has_value());
        CHECK(std::abs(*sweep.best_depth[s] - depths[s]) <= 0.002);
        if (s > 0) CHECK(*sweep.best_depth[s] > *sweep.best_depth[s - 1]);
    }

    // composite beats any single-depth refocus of the whole field
    const DepthMap map = compose_all_in_focus(wall, sweep, segments);
    const double composite_brenner = brenner_index(map.all_in_focus);
    for (double z : depths) {
        const ComplexField single = propagate(wall, -z);
        CHECK(composite_brenner >= brenner_index(intensity(single)) * 0.999);
    }
    // depth raster spans the staircase range
    double lo = 1e9, hi = 0.0;
    for (double v : map.depth_raster) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.44);
    CHECK(hi <= 0.49);
}

TEST_CASE("compose_all_in_focus of a single-depth object is a plain refocus") {
    const int n = 96;
    const double z = 0.45;
    const ComplexField wall = propagate(dot_texture(n, n, 13, 5, 40), z);
    const SegmentGrid segments{2, 3, 0.2};
    const DepthSweepResult sweep = refocus_sweep(wall, segments, 0.44, 0.46, 0.001);
    const DepthMap map = compose_all_in_focus(wall, sweep, segments);

    // all segments land on the same depth, so the blend must equal the
    // single refocus there
    const IntensityFrame single = intensity(propagate(wall, -map.segment_depth[0]));
    for (size_t k = 0; k < single.size(); ++k)
        CHECK(map.all_in_focus.samples()[k] == Catch::Approx(single.samples()[k]).margin(1e-6));
}

TEST_CASE("compose_all_in_focus with one segment reduces to plain refocus") {
    const int n = 64;
    const ComplexField wall = propagate(dot_texture(n, n, 17, 4, 20), 0.45);
    const SegmentGrid segments{1, 1, 0.0};
    const DepthSweepResult sweep = refocus_sweep(wall, segments, 0.44, 0.46, 0.002);
    REQUIRE(sweep.best_depth[0].has_value());
    const DepthMap map = compose_all_in_focus(wall, sweep, segments);
    const IntensityFrame single = intensity(propagate(wall, -*sweep.best_depth[0]));
    for (size_t k = 0; k < single.size(); ++k)
        CHECK(map.all_in_focus.samples()[k] == Catch::Approx(single.samples()[k]).margin(1e-9));
}

TEST_CASE("compose_all_in_focus fills undefined segments from neighbors") {
    const int n = 96;
    // texture only on the left half: right segments see a constant field
    ComplexField texture(n, n, kPitch, kWavelength);
    const ComplexField dots = dot_texture(n, n, 19, 5, 40);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n / 2; ++x) texture.at(y, x) = dots.at(y, x);
    const ComplexField wall = propagate(texture, 0.45);

    const SegmentGrid segments{1, 4, 0.0};
    DepthSweepResult sweep = refocus_sweep(wall, segments, 0.44, 0.46, 0.002);
    // rightmost segment may retain faint diffraction; force the flat case
    sweep.best_depth[3] = std::nullopt;
    const DepthMap map = compose_all_in_focus(wall, sweep, segments);
    CHECK(map.undefined_filled >= 1);
    CHECK(map.segment_depth[3] == map.segment_depth[2]);
}

TEST_CASE("residual_contrast_curve records failures and stays partial") {
    const std::vector<double> dzs{0.002, 0.004, 0.006};
    auto broken_builder = [](double) -> CrosstalkScene {
        throw std::runtime_error("scene construction failed");
    };
    const CrosstalkReport report = residual_contrast_curve(broken_builder, dzs, {});
    CHECK(report.partial);
    CHECK(report.failures.size() == 3);
    for (double v : report.residual_contrast) CHECK(std::isnan(v));
    CHECK_FALSE(report.resolved_delta_z.has_value());

    CHECK_THROWS_AS(residual_contrast_curve(broken_builder, {0.002, 0.001, 0.003}, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(residual_contrast_curve(broken_builder, {0.002, 0.003}, {}),
                    std::invalid_argument);
}

TEST_CASE("residual contrast is maximal for fully overlapped layers") {
    // identical targets side by side at the same depth: the pipeline cannot
    // separate them, so the crosstalk ratio sits near its maximum
    const int n = 128;
    auto builder = [&](double dz) {
        CrosstalkScene scene;
        TargetParams p;
        p.pitch = kPitch;
        p.wavelength = kWavelength;
        p.linewidths = {4 * kPitch};
        ObjectLayer left{make_test_target("usaf_bars", p), 0.4, {-14 * kPitch, 0.0}};
        ObjectLayer right{make_test_target("usaf_bars", p), 0.4 + dz, {14 * kPitch, 0.0}};
        scene.layers = {left, right};
        scene.cs = synthesize_coded_surface(5, n, n, kPitch, kWavelength, 4 * kPitch, 0.7, 1.0, 1.0);
        scene.trajectory = ScanTrajectory::raster(3, 3, 0.8e-3, 0.8e-3);
        scene.meta = AcquisitionMeta{0.75e-3, kWavelength, kPitch, {}};
        scene.geometry = Geometry{1.0, 0.4};
        scene.seed = 5;
        return scene;
    };
    CrosstalkPipelineConfig config;
    config.recon.epochs = 5;
    config.refine_passes = 1;
    const CrosstalkReport report =
        residual_contrast_curve(builder, {0.0, 0.02, 0.05}, config);
    REQUIRE_FALSE(std::isnan(report.residual_contrast[0]));
    // gap zero means layer 2 leaks through in full strength
    CHECK(report.residual_contrast[0] >= report.residual_contrast[1] - 1e-9);
    CHECK(report.residual_contrast[0] >= report.residual_contrast[2] - 1e-9);
}
