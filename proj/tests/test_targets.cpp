#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "pnlos/errors.hpp"
#include "pnlos/targets.hpp"

using namespace pnlos;

namespace {

/// Widths of the contiguous nonzero column runs of a field.
std::vector<int> column_run_widths(const ComplexField& field) {
    std::vector<int> profile(field.width(), 0);
    for (int y = 0; y < field.height(); ++y)
        for (int x = 0; x < field.width(); ++x)
            if (std::abs(field.at(y, x)) > 0.0) profile[x] = 1;
    std::vector<int> runs;
    int run = 0;
    for (int x = 0; x < field.width(); ++x) {
        if (profile[x]) {
            ++run;
        } else if (run > 0) {
            runs.push_back(run);
            run = 0;
        }
    }
    if (run > 0) runs.push_back(run);
    return runs;
}

} // namespace

TEST_CASE("usaf bars render the requested pixel linewidth") {
    TargetParams p56;
    p56.pitch = 8e-6;
    p56.linewidths = {56e-6};
    const auto runs56 = column_run_widths(make_test_target("usaf_bars", p56));
    REQUIRE(runs56.size() == 3);
    for (int w : runs56) CHECK(w == 7);

    TargetParams p70;
    p70.pitch = 10e-6;
    p70.linewidths = {70e-6};
    const auto runs70 = column_run_widths(make_test_target("usaf_bars", p70));
    REQUIRE(runs70.size() == 3);
    for (int w : runs70) CHECK(w == 7);
}

TEST_CASE("usaf bars stack multiple groups") {
    TargetParams p;
    p.pitch = 8e-6;
    p.linewidths = {48e-6, 32e-6};
    const ComplexField target = make_test_target("usaf_bars", p);
    // widest group dominates the column profile: 3 bars of 6 px
    const auto runs = column_run_widths(target);
    REQUIRE(runs.size() == 3);
    CHECK(runs[0] == 6);
    double peak = 0.0;
    for (const auto& v : target.samples()) peak = std::max(peak, std::abs(v));
    CHECK(peak == 1.0);
}

TEST_CASE("blank target is all zeros") {
    TargetParams p;
    p.height = 24;
    p.width = 16;
    const ComplexField blank = make_test_target("blank", p);
    for (const auto& v : blank.samples()) CHECK(v == cplx{0.0, 0.0});

    TargetParams empty_bars;
    const ComplexField zero_bars = make_test_target("usaf_bars", empty_bars);
    for (const auto& v : zero_bars.samples()) CHECK(v == cplx{0.0, 0.0});
}

TEST_CASE("text target rasterizes deterministically at the requested scale") {
    TargetParams p;
    p.text = "PN";
    p.text_scale = 4;
    const ComplexField a = make_test_target("text", p);
    const ComplexField b = make_test_target("text", p);
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) CHECK(a.samples()[k] == b.samples()[k]);

    double ink = 0.0;
    for (const auto& v : a.samples()) ink += std::abs(v);
    CHECK(ink > 0.0);
    // glyph cell is 5 columns * scale wide plus 1 cell spacing
    CHECK(a.width() == 2 * 5 * 4 + 4 + 2 * p.margin);
    CHECK(a.height() == 7 * 4 + 2 * p.margin);
}

TEST_CASE("image_file target loads PGM and rejects garbage") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pnlos_target_test";
    fs::create_directories(dir);

    const fs::path pgm = dir / "ramp.pgm";
    {
        std::ofstream out(pgm, std::ios::binary);
        out << "P5\n4 2\n255\n";
        const unsigned char px[8] = {0, 51, 102, 153, 204, 255, 0, 255};
        out.write(reinterpret_cast<const char*>(px), 8);
    }
    TargetParams p;
    p.file = pgm.string();
    p.margin = 0;
    const ComplexField img = make_test_target("image_file", p);
    REQUIRE(img.height() == 2);
    REQUIRE(img.width() == 4);
    CHECK(std::abs(img.at(0, 1)) == Catch::Approx(51.0 / 255.0));
    CHECK(std::abs(img.at(1, 1)) == Catch::Approx(1.0));

    const fs::path junk = dir / "junk.pgm";
    { std::ofstream out(junk); out << "not an image"; }
    TargetParams bad;
    bad.file = junk.string();
    CHECK_THROWS_AS(make_test_target("image_file", bad), DataError);

    TargetParams missing;
    missing.file = (dir / "missing.pgm").string();
    CHECK_THROWS_AS(make_test_target("image_file", missing), DataError);

    CHECK_THROWS_AS(make_test_target("nonsense", TargetParams{}), std::invalid_argument);
}
