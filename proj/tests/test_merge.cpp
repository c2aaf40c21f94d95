#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "burstfuse/errors.hpp"
#include "burstfuse/merge.hpp"
#include "burstfuse/metrics.hpp"
#include "burstfuse/raw.hpp"
#include "burstfuse/synth.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace burstfuse;

namespace {

RgbImage constant_truth(int w, int h, float v) {
    RgbImage img(w, h);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) img.plane(c).at(x, y) = v;
    return img;
}

Burst clean_burst(const RgbImage& truth, const std::vector<Vec2f>& offsets) {
    return synthesize_burst(truth, offsets, NoiseParams{}, 7);
}

std::vector<Vec2f> zero_offsets(int n) { return std::vector<Vec2f>(n, Vec2f{0.0f, 0.0f}); }

MergeConfig quiet_config() {
    MergeConfig cfg;
    cfg.threads = 1;
    return cfg;
}

// 2x2 mean decimation, for comparing a zoom-2 merge with a zoom-1 merge.
RgbImage box_down2_rgb(const RgbImage& src) {
    RgbImage out(src.width() / 2, src.height() / 2);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                const ImageF& p = src.plane(c);
                out.plane(c).at(x, y) = 0.25f * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) +
                                                 p.at(2 * x, 2 * y + 1) + p.at(2 * x + 1, 2 * y + 1));
            }
        }
    }
    return out;
}

AlignmentField garbage_field(int w, int h, int tile_size) {
    AlignmentField f = AlignmentField::zeros(w, h, tile_size);
    for (Vec2f& v : f.vec) v = Vec2f{1e6f, 1e6f};
    return f;
}

}  // namespace

TEST_CASE("MemoryMeter tracks the persistent plus transient high-water mark") {
    MemoryMeter meter;
    meter.add_persistent(100);
    CHECK(meter.peak() == 100);
    meter.begin_frame();
    meter.add_transient(50);
    CHECK(meter.peak() == 150);
    meter.begin_frame();
    meter.add_transient(30);
    CHECK(meter.peak() == 150);  // smaller frame does not move the peak
    meter.begin_frame();
    meter.add_transient(80);
    CHECK(meter.peak() == 180);
}

TEST_CASE("constant burst is conserved") {
    const RgbImage truth = constant_truth(32, 32, 0.4f);
    const auto offsets = zero_offsets(5);
    const Burst burst = clean_burst(truth, offsets);
    const auto fields = oracle_fields(offsets, 32, 32, 16);
    const RgbImage out = merge_burst(burst, quiet_config(), nullptr, &fields);
    REQUIRE(out.width() == 32);
    REQUIRE(out.height() == 32);
    CHECK(testsup::max_abs_diff(out, truth) < 1e-6);
}

TEST_CASE("mosaic samples survive the merge at their own sites") {
    const int w = 48, h = 48;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 3);
    const auto offsets = zero_offsets(3);
    const Burst burst = clean_burst(truth, offsets);
    const auto fields = oracle_fields(offsets, w, h, 16);
    MergeConfig cfg = quiet_config();
    cfg.robustness = false;  // unit sample weights at zero displacement
    const RgbImage out = merge_burst(burst, cfg, nullptr, &fields);

    const ImageF& mosaic = burst.frames[0].data;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float m = mosaic.at(x, y);
            switch (cfa_channel(x, y)) {
                case CfaChannel::red:
                    // The 3x3 gather holds exactly one red sample here.
                    CHECK(std::abs(out.r.at(x, y) - m) < 1e-9);
                    break;
                case CfaChannel::blue:
                    CHECK(std::abs(out.b.at(x, y) - m) < 1e-9);
                    break;
                case CfaChannel::green: {
                    // Four diagonal neighbors are green too; the result is a
                    // convex mix of the five.
                    float lo = m, hi = m;
                    for (int dy = -1; dy <= 1; dy += 2) {
                        for (int dx = -1; dx <= 1; dx += 2) {
                            const int sx = x + dx, sy = y + dy;
                            if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
                            lo = std::min(lo, mosaic.at(sx, sy));
                            hi = std::max(hi, mosaic.at(sx, sy));
                        }
                    }
                    CHECK(out.g.at(x, y) >= lo - 1e-7f);
                    CHECK(out.g.at(x, y) <= hi + 1e-7f);
                    break;
                }
            }
        }
    }
}

TEST_CASE("accumulation is exactly order, thread and rerun invariant") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 5);
    const auto offsets = generate_burst_offsets(4, 1.0, 11);
    const Burst burst = clean_burst(truth, offsets);
    const auto fields = oracle_fields(offsets, w, h, 16);
    MergeConfig cfg = quiet_config();

    auto run = [&](const std::vector<int>& order, int threads) {
        MergeConfig c = cfg;
        c.threads = threads;
        MergeEngine engine(burst.frames[0], burst.noise, c);
        for (int k : order) engine.accumulate(burst.frames[k], fields[k], k == 0);
        return engine;
    };

    const MergeEngine a = run({0, 1, 2, 3}, 1);
    const MergeEngine b = run({2, 0, 3, 1}, 1);
    const MergeEngine c = run({0, 1, 2, 3}, 4);
    const MergeEngine d = run({0, 1, 2, 3}, 1);

    CHECK(a.raw_accumulator() == b.raw_accumulator());
    CHECK(a.raw_accumulator() == c.raw_accumulator());
    CHECK(a.raw_accumulator() == d.raw_accumulator());
    CHECK(testsup::max_abs_diff(a.finalize(), b.finalize()) == 0.0);
    CHECK(testsup::max_abs_diff(a.finalize(), c.finalize()) == 0.0);
}

TEST_CASE("a frame aligned out of bounds contributes nothing") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 9);
    const Burst burst = clean_burst(truth, zero_offsets(2));
    const MergeConfig cfg = quiet_config();

    MergeEngine with(burst.frames[0], burst.noise, cfg);
    with.accumulate(burst.frames[0], AlignmentField::zeros(w, h, 16), true);
    with.accumulate(burst.frames[1], garbage_field(w, h, 16), false);

    MergeEngine without(burst.frames[0], burst.noise, cfg);
    without.accumulate(burst.frames[0], AlignmentField::zeros(w, h, 16), true);

    CHECK(with.raw_accumulator() == without.raw_accumulator());
    CHECK(testsup::max_abs_diff(with.finalize(), without.finalize()) == 0.0);
}

TEST_CASE("starved output falls back to the demosaiced base frame") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 13);
    const Burst burst = clean_burst(truth, zero_offsets(1));
    MergeEngine engine(burst.frames[0], burst.noise, quiet_config());
    // No frames fed: every channel is starved.
    const RgbImage out = engine.finalize();
    const RgbImage fallback = demosaic_bilinear(burst.frames[0]);
    CHECK(testsup::max_abs_diff(out, fallback) == 0.0);
}

TEST_CASE("output stays inside the observed sample range") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_random_rgb(w, h, 21);
    const auto offsets = generate_burst_offsets(4, 1.0, 22);
    const Burst burst = clean_burst(truth, offsets);
    const auto fields = oracle_fields(offsets, w, h, 16);
    const RgbImage out = merge_burst(burst, quiet_config(), nullptr, &fields);

    float lo = 1e9f, hi = -1e9f;
    for (const BayerFrame& f : burst.frames) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                lo = std::min(lo, f.data.at(x, y));
                hi = std::max(hi, f.data.at(x, y));
            }
        }
    }
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                CHECK(out.plane(c).at(x, y) >= lo - 1e-9f);
                CHECK(out.plane(c).at(x, y) <= hi + 1e-9f);
            }
        }
    }
}

TEST_CASE("zoom 2 doubles the grid and agrees with zoom 1 after decimation") {
    const int w = 48, h = 48;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 31);
    const auto offsets = generate_burst_offsets(5, 1.0, 32);
    const Burst burst = clean_burst(truth, offsets);
    const auto fields = oracle_fields(offsets, w, h, 16);

    MergeConfig cfg = quiet_config();
    const RgbImage at1 = merge_burst(burst, cfg, nullptr, &fields);
    cfg.zoom = 2.0;
    const RgbImage at2 = merge_burst(burst, cfg, nullptr, &fields);
    REQUIRE(at2.width() == 2 * w);
    REQUIRE(at2.height() == 2 * h);
    CHECK(psnr_rgb(box_down2_rgb(at2), at1) > 30.0);
}

TEST_CASE("constructor and merge_burst validation") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 41);
    const Burst burst = clean_burst(truth, zero_offsets(3));

    SUBCASE("zoom range") {
        MergeConfig cfg = quiet_config();
        cfg.zoom = 0.5;
        CHECK_THROWS_AS(MergeEngine(burst.frames[0], burst.noise, cfg), InvariantError);
        cfg.zoom = 3.5;
        CHECK_THROWS_AS(merge_burst(burst, cfg), InvariantError);
    }
    SUBCASE("odd base dimensions") {
        BayerFrame odd;
        odd.data.reset(31, 32);
        CHECK_THROWS_AS(MergeEngine(odd, NoiseParams{}, quiet_config()), InvariantError);
    }
    SUBCASE("base fed twice") {
        MergeEngine engine(burst.frames[0], burst.noise, quiet_config());
        const AlignmentField zero = AlignmentField::zeros(w, h, 16);
        engine.accumulate(burst.frames[0], zero, true);
        CHECK_THROWS_AS(engine.accumulate(burst.frames[0], zero, true), InvariantError);
    }
    SUBCASE("frame shape mismatch") {
        MergeEngine engine(burst.frames[0], burst.noise, quiet_config());
        BayerFrame small;
        small.data.reset(16, 16);
        CHECK_THROWS_AS(engine.accumulate(small, AlignmentField::zeros(16, 16, 16), false),
                        InvariantError);
    }
    SUBCASE("base index range") {
        MergeConfig cfg = quiet_config();
        cfg.base_index = -1;
        CHECK_THROWS_AS(merge_burst(burst, cfg), InvariantError);
        cfg.base_index = 3;
        CHECK_THROWS_AS(merge_burst(burst, cfg), InvariantError);
        cfg.base_index = 2;
        cfg.frame_cap = 2;  // cap excludes the requested base
        CHECK_THROWS_AS(merge_burst(burst, cfg), InvariantError);
    }
    SUBCASE("not enough alignment fields") {
        const auto fields = oracle_fields(zero_offsets(2), w, h, 16);
        CHECK_THROWS_AS(merge_burst(burst, quiet_config(), nullptr, &fields), InvariantError);
    }
}

TEST_CASE("diagnostics describe the run") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 51);
    const auto offsets = generate_burst_offsets(3, 1.0, 52);
    const Burst burst = clean_burst(truth, offsets);
    const auto fields = oracle_fields(offsets, w, h, 16);

    MergeDiagnostics diag;
    ImageF mask_mean;
    merge_burst(burst, quiet_config(), &diag, &fields, &mask_mean);

    CHECK(diag.snr == 100.0);  // noiseless burst hits the cap
    CHECK(diag.tuning.tile_size == 16);
    REQUIRE(diag.frames.size() == 3);
    for (const FrameDiagnostics& fd : diag.frames) {
        CHECK(fd.mean_mask >= 0.0);
        CHECK(fd.mean_mask <= 1.0);
        CHECK(fd.mean_abs_v >= 0.0);
    }
    CHECK(diag.peak_bytes > 0);
    CHECK(diag.accumulate_ms >= 0.0);

    REQUIRE(mask_mean.width() == w / 2);
    REQUIRE(mask_mean.height() == h / 2);
    for (int y = 0; y < mask_mean.height(); ++y) {
        for (int x = 0; x < mask_mean.width(); ++x) {
            CHECK(mask_mean.at(x, y) >= 0.0f);
            CHECK(mask_mean.at(x, y) <= 1.0f);
        }
    }

    testsup::TempDir tmp("merge_diag");
    write_merge_diagnostics_csv(tmp.file("diag.csv"), diag);
    std::ifstream f(tmp.file("diag.csv"));
    REQUIRE(f.good());
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line.rfind("# snr=", 0) == 0);
    REQUIRE(std::getline(f, line));
    CHECK(line == "frame,mean_mask,mean_abs_v");
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("snr and tile size overrides reach the tuning") {
    const RgbImage truth = testsup::make_smooth_rgb(32, 32, 61);
    const Burst burst = clean_burst(truth, zero_offsets(1));

    MergeConfig cfg = quiet_config();
    cfg.snr_override = 12.0;
    MergeEngine low_snr(burst.frames[0], burst.noise, cfg);
    CHECK(low_snr.diagnostics().snr == 12.0);
    CHECK(low_snr.tuning().tile_size == tuning_for_snr(12.0).tile_size);

    cfg.tile_size_override = 32;
    MergeEngine pinned(burst.frames[0], burst.noise, cfg);
    CHECK(pinned.tuning().tile_size == 32);
}

TEST_CASE("peak memory does not grow with burst length") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 71);

    auto peak_for = [&](int frames) {
        const auto offsets = generate_burst_offsets(frames, 1.0, 72);
        const Burst burst = clean_burst(truth, offsets);
        const auto fields = oracle_fields(offsets, w, h, 16);
        MergeDiagnostics diag;
        merge_burst(burst, quiet_config(), &diag, &fields);
        return diag.peak_bytes;
    };

    CHECK(peak_for(3) == peak_for(12));
}

TEST_CASE("merge_burst equals a manual engine run") {
    const int w = 32, h = 32;
    const RgbImage truth = testsup::make_smooth_rgb(w, h, 81);
    const auto offsets = generate_burst_offsets(4, 1.0, 82);
    const Burst burst = clean_burst(truth, offsets);
    const auto fields = oracle_fields(offsets, w, h, 16);
    const MergeConfig cfg = quiet_config();

    const RgbImage via_helper = merge_burst(burst, cfg, nullptr, &fields);

    MergeEngine engine(burst.frames[0], burst.noise, cfg);
    for (int k = 0; k < burst.size(); ++k) engine.accumulate(burst.frames[k], fields[k], k == 0);
    CHECK(testsup::max_abs_diff(via_helper, engine.finalize()) == 0.0);
}

TEST_CASE("finishing sharpens while staying in range") {
    const RgbImage img = testsup::make_smooth_rgb(48, 48, 91);
    const RgbImage finished = finish_image(img, 2.0, 1.0);
    REQUIRE(finished.width() == 48);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 48; ++y) {
            for (int x = 0; x < 48; ++x) {
                CHECK(finished.plane(c).at(x, y) >= 0.0f);
                CHECK(finished.plane(c).at(x, y) <= 1.0f);
            }
        }
    }
    CHECK(sharpness(finished) > sharpness(img));

    // The merge applies it when asked.
    const Burst burst = clean_burst(img, zero_offsets(2));
    const auto fields = oracle_fields(zero_offsets(2), 48, 48, 16);
    MergeConfig cfg = quiet_config();
    cfg.finish = true;
    cfg.finish_sigma = 2.0;
    const RgbImage out = merge_burst(burst, cfg, nullptr, &fields);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 48; ++y) {
            for (int x = 0; x < 48; ++x) {
                CHECK(out.plane(c).at(x, y) >= 0.0f);
                CHECK(out.plane(c).at(x, y) <= 1.0f);
            }
        }
    }
}
