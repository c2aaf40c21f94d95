#include <cmath>

#include "burstfuse/errors.hpp"
#include "burstfuse/filters.hpp"
#include "burstfuse/robustness.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace burstfuse;

namespace {

NoiseTables constant_tables(double sigma_md, double d_md) {
    NoiseTables t;
    t.bins = 1;
    t.sigma_md = {sigma_md};
    t.d_md = {d_md};
    return t;
}

RgbImage constant_rgb(int w, int h, float r, float g, float b) {
    RgbImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.r.at(x, y) = r;
            img.g.at(x, y) = g;
            img.b.at(x, y) = b;
        }
    }
    return img;
}

ImageF constant_image(int w, int h, float v) {
    ImageF img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = v;
    return img;
}

ImageF checkerboard(int w, int h) {
    ImageF img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = ((x + y) & 1) ? 1.0f : 0.0f;
    return img;
}

// Field whose 3x3 tile neighborhoods always mix two displacement values,
// so every tile reads as moving.
AlignmentField busy_field(int full_w, int full_h, int tile_size) {
    AlignmentField f = AlignmentField::zeros(full_w, full_h, tile_size);
    for (int ty = 0; ty < f.tiles_y; ++ty)
        for (int tx = 0; tx < f.tiles_x; ++tx)
            if ((tx + ty) & 1) f.tile(tx, ty) = Vec2f{2.0f, 0.0f};
    return f;
}

}  // namespace

TEST_CASE("box3_sum") {
    const ImageF nine = box3_sum(constant_image(8, 6, 1.0f));
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x) CHECK(nine.at(x, y) == doctest::Approx(9.0f));

    ImageF impulse(9, 9);
    impulse.at(4, 4) = 1.0f;
    const ImageF s = box3_sum(impulse);
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 9; ++x) {
            const bool inside = std::abs(x - 4) <= 1 && std::abs(y - 4) <= 1;
            CHECK(s.at(x, y) == doctest::Approx(inside ? 1.0f : 0.0f));
        }
    }
}

TEST_CASE("min5_filter erodes with the full 5x5 footprint") {
    ImageF img = constant_image(12, 12, 1.0f);
    img.at(5, 5) = 0.0f;
    const ImageF eroded = min5_filter(img);
    for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 12; ++x) {
            const bool inside = std::abs(x - 5) <= 2 && std::abs(y - 5) <= 2;
            CHECK(eroded.at(x, y) == doctest::Approx(inside ? 0.0f : 1.0f));
        }
    }
    // Constant input is unchanged.
    const ImageF flat = min5_filter(constant_image(7, 5, 0.3f));
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) CHECK(flat.at(x, y) == doctest::Approx(0.3f));
}

TEST_CASE("local_statistics") {
    const int w = 32, h = 32;
    const AlignmentField zero_field = AlignmentField::zeros(2 * w, 2 * h, 16);

    SUBCASE("identical constant guides") {
        const RgbImage guide = constant_rgb(w, h, 0.3f, 0.3f, 0.3f);
        const LocalStats stats = local_statistics(guide, guide, zero_field);
        REQUIRE(stats.d_ms.width() == w);
        REQUIRE(stats.d_ms.height() == h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                CHECK(stats.d_ms.at(x, y) == doctest::Approx(0.0f).epsilon(1e-7));
                CHECK(stats.sigma_ms.at(x, y) == doctest::Approx(0.0f).epsilon(1e-6));
                CHECK(stats.brightness.at(x, y) == doctest::Approx(0.3f).epsilon(1e-6));
            }
        }
    }
    SUBCASE("single-channel offset shows up as the max-channel difference") {
        const RgbImage base = constant_rgb(w, h, 0.3f, 0.3f, 0.3f);
        const RgbImage frame = constant_rgb(w, h, 0.5f, 0.3f, 0.3f);
        const LocalStats stats = local_statistics(base, frame, zero_field);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                CHECK(stats.d_ms.at(x, y) == doctest::Approx(0.2f).epsilon(1e-6));
    }
    SUBCASE("matching alignment field cancels an integer shift") {
        RgbImage base(w, h);
        base.r = testsup::make_smooth_luma(w, h, 1);
        base.g = testsup::make_smooth_luma(w, h, 2);
        base.b = testsup::make_smooth_luma(w, h, 3);
        // Frame content moved by (+2, +1) half-res px; the field stores the
        // same displacement in full-res units.
        RgbImage frame(w, h);
        frame.r = testsup::bilinear_shift(base.r, 2.0, 1.0);
        frame.g = testsup::bilinear_shift(base.g, 2.0, 1.0);
        frame.b = testsup::bilinear_shift(base.b, 2.0, 1.0);
        AlignmentField field = AlignmentField::zeros(2 * w, 2 * h, 16);
        for (Vec2f& v : field.vec) v = Vec2f{4.0f, 2.0f};

        const LocalStats compensated = local_statistics(base, frame, field);
        const LocalStats uncompensated = local_statistics(base, frame, zero_field);
        double max_comp = 0.0, max_unc = 0.0;
        for (int y = 6; y < h - 6; ++y) {
            for (int x = 6; x < w - 6; ++x) {
                max_comp = std::max(max_comp, static_cast<double>(compensated.d_ms.at(x, y)));
                max_unc = std::max(max_unc, static_cast<double>(uncompensated.d_ms.at(x, y)));
            }
        }
        CHECK(max_comp < 1e-5);
        CHECK(max_unc > 0.01);
    }
    SUBCASE("mismatched guide shapes throw") {
        const RgbImage base = constant_rgb(16, 16, 0.3f, 0.3f, 0.3f);
        const RgbImage frame = constant_rgb(20, 16, 0.3f, 0.3f, 0.3f);
        CHECK_THROWS_AS(local_statistics(base, frame, zero_field), InvariantError);
    }
}

TEST_CASE("noise_corrected_stats") {
    const int w = 8, h = 8;
    LocalStats stats;
    stats.d_ms = constant_image(w, h, 0.2f);
    stats.sigma_ms = constant_image(w, h, 0.02f);
    stats.brightness = constant_image(w, h, 0.5f);

    SUBCASE("shrinkage halves a difference equal to the noise scale") {
        ImageF sigma, d;
        noise_corrected_stats(stats, constant_tables(0.05, 0.2), &sigma, &d);
        CHECK(d.at(3, 3) == doctest::Approx(0.1f).epsilon(1e-6));
        CHECK(sigma.at(3, 3) == doctest::Approx(0.05f).epsilon(1e-6));  // noise floor wins
    }
    SUBCASE("no model noise leaves the measured difference intact") {
        ImageF sigma, d;
        noise_corrected_stats(stats, constant_tables(0.0, 0.0), &sigma, &d);
        CHECK(d.at(3, 3) == doctest::Approx(0.2f).epsilon(1e-6));
        CHECK(sigma.at(3, 3) == doctest::Approx(0.02f).epsilon(1e-6));  // measured std wins
    }
    SUBCASE("zero difference and zero model noise give zero") {
        stats.d_ms = constant_image(w, h, 0.0f);
        ImageF sigma, d;
        noise_corrected_stats(stats, constant_tables(0.0, 0.0), &sigma, &d);
        CHECK(d.at(3, 3) == 0.0f);
    }
    SUBCASE("large differences shrink only slightly") {
        stats.d_ms = constant_image(w, h, 0.5f);
        ImageF sigma, d;
        noise_corrected_stats(stats, constant_tables(0.05, 0.02), &sigma, &d);
        // 0.5 * 0.25 / (0.25 + 0.0004)
        CHECK(d.at(3, 3) == doctest::Approx(0.4992f).epsilon(1e-3));
    }
}

TEST_CASE("motion_prior_scale") {
    const TuningParams tune;

    SUBCASE("uniform field is calm everywhere") {
        AlignmentField field = AlignmentField::zeros(80, 80, 16);
        for (Vec2f& v : field.vec) v = Vec2f{3.0f, 7.0f};
        const MotionPrior prior = motion_prior_scale(field, tune);
        CHECK(prior.tiles_x == 5);
        CHECK(prior.tiles_y == 5);
        CHECK(prior.tile_size == 16);
        CHECK(prior.m_th == doctest::Approx(0.8f));
        for (size_t i = 0; i < prior.scale.size(); ++i) {
            CHECK(prior.extent[i] == doctest::Approx(0.0f));
            CHECK(prior.scale[i] == doctest::Approx(2.0f));
        }
    }
    SUBCASE("one outlier tile marks its neighborhood as moving") {
        AlignmentField field = AlignmentField::zeros(80, 80, 16);
        field.tile(2, 2) = Vec2f{3.0f, 4.0f};
        const MotionPrior prior = motion_prior_scale(field, tune);
        // 3-4-5 extent in the 3x3 neighborhoods touching the outlier.
        for (int ty = 1; ty <= 3; ++ty) {
            for (int tx = 1; tx <= 3; ++tx) {
                CHECK(prior.extent_at_tile(tx, ty) == doctest::Approx(5.0f).epsilon(1e-6));
                CHECK(prior.scale[static_cast<size_t>(ty) * 5 + tx] == doctest::Approx(12.0f));
            }
        }
        // Tiles not adjacent to the outlier stay calm.
        CHECK(prior.extent_at_tile(0, 2) == doctest::Approx(0.0f));
        CHECK(prior.scale[2 * 5 + 0] == doctest::Approx(2.0f));
    }
    SUBCASE("threshold is strict") {
        AlignmentField field = AlignmentField::zeros(80, 80, 16);
        field.tile(2, 2) = Vec2f{0.8f, 0.0f};
        MotionPrior prior = motion_prior_scale(field, tune);
        CHECK(prior.scale[2 * 5 + 2] == doctest::Approx(2.0f));  // extent == m_th stays calm
        field.tile(2, 2) = Vec2f{0.81f, 0.0f};
        prior = motion_prior_scale(field, tune);
        CHECK(prior.scale[2 * 5 + 2] == doctest::Approx(12.0f));
    }
    SUBCASE("half-res pixel lookup picks the covering tile") {
        AlignmentField field = AlignmentField::zeros(80, 80, 16);
        const MotionPrior prior = motion_prior_scale(field, tune);
        CHECK(prior.tile_index_half(0, 0) == 0);
        CHECK(prior.tile_index_half(7, 0) == 0);   // full-res 14, still tile 0
        CHECK(prior.tile_index_half(8, 0) == 1);   // full-res 16, tile 1
        CHECK(prior.tile_index_half(8, 8) == 5 + 1);
        CHECK(prior.tile_index_half(500, 500) == 24);  // clamped to the last tile
    }
}

TEST_CASE("robustness_map") {
    const TuningParams tune;
    const int w = 32, h = 32;
    const AlignmentField calm = AlignmentField::zeros(2 * w, 2 * h, 16);
    const MotionPrior prior = motion_prior_scale(calm, tune);

    SUBCASE("no difference saturates to full confidence") {
        const ImageF map =
            robustness_map(constant_image(w, h, 0.1f), constant_image(w, h, 0.0f), prior, tune);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) CHECK(map.at(x, y) == 1.0f);
    }
    SUBCASE("difference at the noise scale lands on the mid slope") {
        const ImageF map =
            robustness_map(constant_image(w, h, 0.1f), constant_image(w, h, 0.1f), prior, tune);
        // 2 * exp(-1) - 0.12
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                CHECK(map.at(x, y) == doctest::Approx(0.61575888f).epsilon(1e-6));
    }
    SUBCASE("zero sigma treats any difference as motion") {
        const ImageF zeros_map =
            robustness_map(constant_image(w, h, 0.0f), constant_image(w, h, 0.5f), prior, tune);
        CHECK(zeros_map.at(10, 10) == 0.0f);
        const ImageF ones_map =
            robustness_map(constant_image(w, h, 0.0f), constant_image(w, h, 0.0f), prior, tune);
        CHECK(ones_map.at(10, 10) == 1.0f);
    }
    SUBCASE("output is the 5x5 erosion of the pointwise response") {
        const ImageF luma = testsup::make_random_luma(w, h, 42);
        ImageF sigma(w, h), d(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                sigma.at(x, y) = 0.02f + 0.1f * luma.at(x, y);
                d.at(x, y) = 0.15f * luma.at((x + 7) % w, (y + 3) % h);
            }
        }
        const ImageF map = robustness_map(sigma, d, prior, tune);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double ratio = static_cast<double>(d.at(x, y)) / sigma.at(x, y);
                const float pre = static_cast<float>(
                    std::clamp(2.0 * std::exp(-ratio * ratio) - tune.t, 0.0, 1.0));
                CHECK(map.at(x, y) >= 0.0f);
                CHECK(map.at(x, y) <= 1.0f);
                CHECK(map.at(x, y) <= pre + 1e-6f);  // erosion only lowers
            }
        }
    }
}

TEST_CASE("hf_variance_reject") {
    const TuningParams tune;
    const int w = 32, h = 32;

    SUBCASE("moving high-frequency content is rejected everywhere") {
        const MotionPrior prior = motion_prior_scale(busy_field(2 * w, 2 * h, 16), tune);
        ImageF mask = constant_image(w, h, 1.0f);
        hf_variance_reject(checkerboard(w, h), prior, 0.5, mask);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) CHECK(mask.at(x, y) == 0.0f);
    }
    SUBCASE("calm tiles are never touched") {
        const MotionPrior prior = motion_prior_scale(AlignmentField::zeros(2 * w, 2 * h, 16), tune);
        ImageF mask = constant_image(w, h, 1.0f);
        hf_variance_reject(checkerboard(w, h), prior, 0.5, mask);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) CHECK(mask.at(x, y) == 1.0f);
    }
    SUBCASE("flat content survives motion") {
        const MotionPrior prior = motion_prior_scale(busy_field(2 * w, 2 * h, 16), tune);
        ImageF mask = constant_image(w, h, 1.0f);
        hf_variance_reject(constant_image(w, h, 0.5f), prior, 0.5, mask);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) CHECK(mask.at(x, y) == 1.0f);
    }
    SUBCASE("smooth content survives motion") {
        const MotionPrior prior = motion_prior_scale(busy_field(2 * w, 2 * h, 16), tune);
        ImageF mask = constant_image(w, h, 1.0f);
        // Gentle gradients lose little variance to a 3x3 lowpass.
        hf_variance_reject(testsup::make_smooth_luma(w, h, 5), prior, 0.2, mask);
        int kept = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) kept += mask.at(x, y) == 1.0f ? 1 : 0;
        CHECK(kept > w * h / 2);
    }
    SUBCASE("mismatched mask dimensions throw") {
        const MotionPrior prior = motion_prior_scale(AlignmentField::zeros(2 * w, 2 * h, 16), tune);
        ImageF mask = constant_image(w, h - 2, 1.0f);
        ImageF luma = checkerboard(w, h);
        CHECK_THROWS_AS(hf_variance_reject(luma, prior, 0.5, mask), InvariantError);
    }
}
