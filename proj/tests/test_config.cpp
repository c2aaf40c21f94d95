#include <fstream>
#include <string>

#include "burstfuse/config.hpp"
#include "burstfuse/errors.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace burstfuse;

namespace {

std::string write_cfg(const testsup::TempDir& dir, const std::string& name,
                      const std::string& content) {
    const std::string path = dir.file(name);
    std::ofstream f(path);
    f << content;
    return path;
}

std::string error_message_of(const std::string& path) {
    MergeConfig cfg;
    std::string simd;
    try {
        apply_config_file(path, cfg, simd);
    } catch (const UsageError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config file applies every recognized key") {
    testsup::TempDir tmp("config_full");
    const std::string path = write_cfg(tmp, "full.cfg",
                                       "threads=2\n"
                                       "simd=scalar\n"
                                       "zoom=1.5\n"
                                       "base_index=1\n"
                                       "frame_cap=8\n"
                                       "robustness=off\n"
                                       "loss_threshold=0.25\n"
                                       "tile_size=32\n"
                                       "search_radius=6\n"
                                       "pyramid_levels=3\n"
                                       "lk_iters=5\n"
                                       "snr=14.5\n"
                                       "mc_bins=32\n"
                                       "mc_samples=5000\n"
                                       "mc_seed=99\n"
                                       "cache_dir=/tmp/bf-cache\n"
                                       "finish=true\n"
                                       "finish_sigma=2.5\n"
                                       "finish_amount=0.8\n");
    MergeConfig cfg;
    std::string simd;
    apply_config_file(path, cfg, simd);

    CHECK(cfg.threads == 2);
    CHECK(simd == "scalar");
    CHECK(cfg.zoom == 1.5);
    CHECK(cfg.base_index == 1);
    CHECK(cfg.frame_cap == 8);
    CHECK(cfg.robustness == false);
    CHECK(cfg.loss_threshold == 0.25);
    CHECK(cfg.tile_size_override == 32);
    CHECK(cfg.align.search_radius == 6);
    CHECK(cfg.align.levels == 3);
    CHECK(cfg.align.lk_iters == 5);
    CHECK(cfg.snr_override == 14.5);
    CHECK(cfg.mc.bins == 32);
    CHECK(cfg.mc.samples_per_bin == 5000);
    CHECK(cfg.mc.seed == 99);
    CHECK(cfg.cache_dir == "/tmp/bf-cache");
    CHECK(cfg.finish == true);
    CHECK(cfg.finish_sigma == 2.5);
    CHECK(cfg.finish_amount == 0.8);
}

TEST_CASE("comments, blanks and whitespace are tolerated") {
    testsup::TempDir tmp("config_ws");
    const std::string path = write_cfg(tmp, "ws.cfg",
                                       "# a full-line comment\n"
                                       "\n"
                                       "   zoom = 2.0   # trailing comment\n"
                                       "\ttile_size\t=\t0\n");
    MergeConfig cfg;
    std::string simd;
    apply_config_file(path, cfg, simd);
    CHECK(cfg.zoom == 2.0);
    CHECK(cfg.tile_size_override == 0);  // 0 means auto
    CHECK(simd.empty());                 // untouched
}

TEST_CASE("unknown keys name the key and the file") {
    testsup::TempDir tmp("config_unknown");
    const std::string path = write_cfg(tmp, "bad.cfg", "bogus=1\n");
    MergeConfig cfg;
    std::string simd;
    CHECK_THROWS_AS(apply_config_file(path, cfg, simd), UsageError);
    const std::string msg = error_message_of(path);
    CHECK(msg.find("unknown config key 'bogus'") != std::string::npos);
    CHECK(msg.find(path) != std::string::npos);
}

TEST_CASE("malformed lines report the line number") {
    testsup::TempDir tmp("config_malformed");
    const std::string path = write_cfg(tmp, "bad.cfg", "zoom=1.5\nthis is not a pair\n");
    const std::string msg = error_message_of(path);
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("expected key=value") != std::string::npos);
}

TEST_CASE("out-of-range and unparsable values are rejected") {
    testsup::TempDir tmp("config_values");
    const char* bad_lines[] = {
        "zoom=abc",           "zoom=0.5",        "zoom=3.5",      "threads=-2",
        "tile_size=9",        "tile_size=4",     "frame_cap=0",   "loss_threshold=2",
        "loss_threshold=-1",  "finish=maybe",    "robustness=2x", "search_radius=0",
        "search_radius=100",  "pyramid_levels=9", "lk_iters=33",  "mc_bins=0",
        "mc_bins=5000",       "mc_samples=0",    "finish_sigma=0", "threads=1.5",
    };
    int idx = 0;
    for (const char* line : bad_lines) {
        const std::string path =
            write_cfg(tmp, "bad_" + std::to_string(idx++) + ".cfg", std::string(line) + "\n");
        MergeConfig cfg;
        std::string simd;
        CHECK_THROWS_AS(apply_config_file(path, cfg, simd), UsageError);
    }
}

TEST_CASE("missing config file is an io error") {
    testsup::TempDir tmp("config_missing");
    MergeConfig cfg;
    std::string simd;
    CHECK_THROWS_AS(apply_config_file(tmp.file("nope.cfg"), cfg, simd), IoError);
}

TEST_CASE("later lines override earlier ones") {
    testsup::TempDir tmp("config_override");
    const std::string path = write_cfg(tmp, "o.cfg", "zoom=1.5\nzoom=2.5\n");
    MergeConfig cfg;
    std::string simd;
    apply_config_file(path, cfg, simd);
    CHECK(cfg.zoom == 2.5);
}
