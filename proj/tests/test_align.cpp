#include <cmath>
#include <fstream>

#include "burstfuse/align.hpp"
#include "burstfuse/errors.hpp"
#include "burstfuse/synth.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace burstfuse;

namespace {

// frame(q) = base(q - s) for integer s, border-clamped.
ImageF integer_shift(const ImageF& base, int sx, int sy) {
    ImageF out(base.width(), base.height());
    for (int y = 0; y < base.height(); ++y) {
        for (int x = 0; x < base.width(); ++x) {
            out.at(x, y) = base.at_clamped(x - sx, y - sy);
        }
    }
    return out;
}

double image_mean(const ImageF& img) {
    double sum = 0.0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) sum += img.at(x, y);
    }
    return sum / static_cast<double>(img.size());
}

}  // namespace

TEST_CASE("build_pyramid") {
    const ImageF luma = testsup::make_smooth_luma(128, 96, 3);

    SUBCASE("halves dimensions and preserves the mean") {
        const auto pyr = build_pyramid(luma, 2);
        REQUIRE(pyr.size() == 2);
        CHECK(pyr[1].width() == 64);
        CHECK(pyr[1].height() == 48);
        CHECK(image_mean(pyr[1]) == doctest::Approx(image_mean(pyr[0])).epsilon(1e-6));
    }
    SUBCASE("rejects depths that shrink below the minimum") {
        // 96 -> 48 -> 24 < 32 at the third level
        CHECK_THROWS_AS(build_pyramid(luma, 3), InvariantError);
        CHECK_THROWS_AS(build_pyramid(luma, 0), InvariantError);
    }
}

TEST_CASE("block match recovers integer shifts exactly") {
    const ImageF base = testsup::make_smooth_luma(128, 128, 11);
    const ImageF frame = integer_shift(base, 3, -2);

    AlignConfig cfg;
    cfg.tile_size = 16;  // 8 px luma tiles
    const AlignmentField field = block_match_luma(base, frame, cfg);
    CHECK(field.tiles_x == 16);
    CHECK(field.tiles_y == 16);

    for (int ty = 2; ty < field.tiles_y - 2; ++ty) {
        for (int tx = 2; tx < field.tiles_x - 2; ++tx) {
            CHECK(field.tile(tx, ty).x == 3.0f);
            CHECK(field.tile(tx, ty).y == -2.0f);
        }
    }
}

TEST_CASE("subpixel refinement leaves exact integer matches untouched") {
    const ImageF base = testsup::make_smooth_luma(128, 128, 11);
    const ImageF frame = integer_shift(base, 3, -2);
    AlignConfig cfg;
    cfg.tile_size = 16;
    AlignmentField field = block_match_luma(base, frame, cfg);
    field = lk_refine_luma(base, frame, std::move(field), cfg);
    for (int ty = 2; ty < field.tiles_y - 2; ++ty) {
        for (int tx = 2; tx < field.tiles_x - 2; ++tx) {
            // Residual is exactly zero at the integer solution, so the
            // first update vanishes and iteration stops.
            CHECK(field.tile(tx, ty).x == doctest::Approx(3.0).epsilon(1e-4));
            CHECK(field.tile(tx, ty).y == doctest::Approx(-2.0).epsilon(1e-4));
        }
    }
}

TEST_CASE("featureless input aligns to zero motion") {
    const ImageF flat(64, 64, 0.5f);
    AlignConfig cfg;
    cfg.tile_size = 16;
    AlignmentField field = block_match_luma(flat, flat, cfg);
    for (const Vec2f& v : field.vec) {
        CHECK(v.x == 0.0f);
        CHECK(v.y == 0.0f);
    }
    field = lk_refine_luma(flat, flat, std::move(field), cfg);
    for (const Vec2f& v : field.vec) {
        CHECK(v.x == 0.0f);  // singular system leaves the vector untouched
        CHECK(v.y == 0.0f);
    }
}

TEST_CASE("align_frame recovers subpixel shifts within 0.1 px") {
    const ImageF base = testsup::make_smooth_luma(96, 96, 17);
    const float dx = 0.25f;
    const float dy = -0.5f;
    const ImageF frame = testsup::bilinear_shift(base, dx, dy);

    AlignConfig cfg;
    cfg.tile_size = 16;
    const AlignmentField field = align_frame(base, frame, cfg);

    // align_frame reports full-resolution (mosaic) pixels: twice the luma shift.
    const double want_x = 2.0 * dx;
    const double want_y = 2.0 * dy;
    double err_sum = 0.0;
    double err_max_interior = 0.0;
    int n = 0;
    for (int ty = 0; ty < field.tiles_y; ++ty) {
        for (int tx = 0; tx < field.tiles_x; ++tx) {
            const Vec2f v = field.tile(tx, ty);
            const double e = std::hypot(v.x - want_x, v.y - want_y);
            err_sum += e;
            ++n;
            const bool interior = tx > 0 && ty > 0 && tx < field.tiles_x - 1 && ty < field.tiles_y - 1;
            if (interior) err_max_interior = std::max(err_max_interior, e);
        }
    }
    CHECK(err_sum / n <= 0.1);
    CHECK(err_max_interior <= 0.1);
}

TEST_CASE("align_burst handles synthetic bursts and validates the base index") {
    const RgbImage truth = testsup::make_smooth_rgb(96, 96, 23);
    const std::vector<Vec2f> offsets = {Vec2f(0, 0), Vec2f(4, 2), Vec2f(-2, 6)};
    const Burst burst = synthesize_burst(truth, offsets, NoiseParams{}, 1);

    AlignConfig cfg;
    cfg.tile_size = 16;
    const auto fields = align_burst(burst, 0, cfg);
    REQUIRE(fields.size() == 3);
    for (const Vec2f& v : fields[0].vec) {
        CHECK(v.x == 0.0f);
        CHECK(v.y == 0.0f);
    }
    // Interior tiles recover the integer content offsets in mosaic pixels.
    for (size_t k = 1; k < fields.size(); ++k) {
        const AlignmentField& f = fields[k];
        for (int ty = 1; ty < f.tiles_y - 1; ++ty) {
            for (int tx = 1; tx < f.tiles_x - 1; ++tx) {
                CHECK(f.tile(tx, ty).x == doctest::Approx(offsets[k].x).epsilon(0.05));
                CHECK(f.tile(tx, ty).y == doctest::Approx(offsets[k].y).epsilon(0.05));
            }
        }
    }

    CHECK_THROWS_AS(align_burst(burst, 3, cfg), InvariantError);
    CHECK_THROWS_AS(align_burst(burst, -1, cfg), InvariantError);
}

TEST_CASE("at_pixel looks up the covering tile with clamping") {
    AlignmentField f = AlignmentField::zeros(64, 32, 16);
    f.tile(1, 0) = Vec2f(5, 6);
    f.tile(3, 1) = Vec2f(-1, -2);
    CHECK(f.at_pixel(16.0f, 0.0f).x == 5.0f);
    CHECK(f.at_pixel(31.9f, 15.9f).x == 5.0f);
    CHECK(f.at_pixel(32.0f, 0.0f).x == 0.0f);
    CHECK(f.at_pixel(500.0f, 500.0f).y == -2.0f);  // clamps to the last tile
    CHECK(f.at_pixel(-3.0f, -3.0f).x == 0.0f);
}

TEST_CASE("subpixel histogram bins fractional parts") {
    AlignmentField a = AlignmentField::zeros(48, 32, 16);  // 3x2 tiles
    for (Vec2f& v : a.vec) v = Vec2f(1.25f, -0.75f);       // frac (0.25, 0.25)
    AlignmentField b = AlignmentField::zeros(48, 32, 16);
    for (Vec2f& v : b.vec) v = Vec2f(0.5f, 2.95f);         // frac (0.5, 0.95)

    const OffsetHistogram hist = subpixel_offset_histogram({a, b}, 10);
    CHECK(hist.total == 12);
    CHECK(hist.at(2, 2) == 6);
    CHECK(hist.at(5, 9) == 6);
    CHECK(hist.marginal_x()[2] == 6);
    CHECK(hist.marginal_x()[5] == 6);
    CHECK(hist.marginal_y()[9] == 6);
}

TEST_CASE("chi_square_uniform") {
    CHECK(chi_square_uniform({10, 10, 10, 10}) == doctest::Approx(0.0));
    CHECK(chi_square_uniform({40, 0, 0, 0}) == doctest::Approx(120.0));
    CHECK(chi_square_uniform({}) == 0.0);
}

TEST_CASE("alignment csv roundtrip") {
    testsup::TempDir tmp("align_csv");
    AlignmentField a = AlignmentField::zeros(48, 32, 16);
    a.tile(2, 1) = Vec2f(1.5f, -2.25f);
    AlignmentField b = AlignmentField::zeros(48, 32, 16);
    b.tile(0, 0) = Vec2f(-0.125f, 3.0f);

    write_alignment_csv(tmp.file("fields.csv"), {a, b});
    const auto loaded = read_alignment_csv(tmp.file("fields.csv"), 48, 32, 16);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].tile(2, 1).x == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(loaded[0].tile(2, 1).y == doctest::Approx(-2.25).epsilon(1e-5));
    CHECK(loaded[1].tile(0, 0).x == doctest::Approx(-0.125).epsilon(1e-5));
    CHECK(loaded[1].tile(2, 1).x == 0.0f);

    // Tiles outside the grid for the claimed image size are rejected.
    CHECK_THROWS_AS(read_alignment_csv(tmp.file("fields.csv"), 16, 16, 16), IoError);
    CHECK_THROWS_AS(read_alignment_csv(tmp.file("absent.csv"), 48, 32, 16), IoError);
}

TEST_CASE("histogram csv is normalized") {
    testsup::TempDir tmp("hist_csv");
    AlignmentField a = AlignmentField::zeros(32, 32, 16);
    for (Vec2f& v : a.vec) v = Vec2f(0.55f, 0.55f);
    const OffsetHistogram hist = subpixel_offset_histogram({a}, 10);
    write_histogram_csv(tmp.file("hist.csv"), hist);

    std::ifstream f(tmp.file("hist.csv"));
    std::string header;
    std::getline(f, header);
    CHECK(header == "bin_x,bin_y,frequency");
    double total = 0.0;
    std::string line;
    while (std::getline(f, line)) {
        const size_t last = line.rfind(',');
        total += std::stod(line.substr(last + 1));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}
