#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

#include "burstfuse/bench.hpp"
#include "burstfuse/config.hpp"
#include "burstfuse/errors.hpp"
#include "burstfuse/image_io.hpp"
#include "burstfuse/merge.hpp"
#include "burstfuse/metrics.hpp"
#include "burstfuse/simd/kernels.hpp"
#include "burstfuse/synth.hpp"

namespace fs = std::filesystem;
using namespace burstfuse;

namespace {

constexpr const char* kVersion = "1.0.0";

// Options shared by every subcommand. CLI flags override config-file values,
// which override defaults.
struct CommonState {
    std::string config_path;
    std::string simd = "auto";
    MergeConfig cfg;

    // raw flag storage + the options that recorded them
    int threads = 0;
    double zoom = 1.0;
    int frame_cap = 15;
    bool no_robustness = false;
    double loss_threshold = 0.5;
    int tile_size = 0;
    double snr = -1.0;
    int search_radius = 4;
    int pyramid_levels = 0;
    int lk_iters = 3;
    bool finish = false;
    std::string cache_dir;

    CLI::Option* o_threads = nullptr;
    CLI::Option* o_zoom = nullptr;
    CLI::Option* o_frame_cap = nullptr;
    CLI::Option* o_loss = nullptr;
    CLI::Option* o_tile = nullptr;
    CLI::Option* o_snr = nullptr;
    CLI::Option* o_radius = nullptr;
    CLI::Option* o_levels = nullptr;
    CLI::Option* o_lk = nullptr;
    CLI::Option* o_cache = nullptr;
    CLI::Option* o_simd = nullptr;
};

void add_common_options(CLI::App* sub, CommonState& st) {
    sub->add_option("--config", st.config_path, "key=value config file (or $BURSTFUSE_CONFIG)");
    st.o_simd = sub->add_option("--simd", st.simd, "kernel variant: auto, scalar, avx2");
    st.o_threads = sub->add_option("--threads", st.threads, "worker threads (0 = hardware)");
    st.o_zoom = sub->add_option("--zoom", st.zoom, "output upscaling factor in [1, 3]");
    st.o_frame_cap = sub->add_option("--frames", st.frame_cap, "max frames merged");
    sub->add_flag("--no-robustness", st.no_robustness, "disable the motion robustness mask");
    st.o_loss = sub->add_option("--loss-threshold", st.loss_threshold,
                                "variance-loss rejection threshold");
    st.o_tile = sub->add_option("--tile-size", st.tile_size, "alignment tile size (0 = from SNR)");
    st.o_snr = sub->add_option("--snr", st.snr, "override the estimated SNR");
    st.o_radius = sub->add_option("--search-radius", st.search_radius, "block match radius");
    st.o_levels = sub->add_option("--pyramid-levels", st.pyramid_levels, "pyramid depth (0 = auto)");
    st.o_lk = sub->add_option("--lk-iters", st.lk_iters, "subpixel refinement iterations");
    sub->add_flag("--finish", st.finish, "apply sharpening and contrast finishing");
    st.o_cache = sub->add_option("--cache-dir", st.cache_dir, "noise table cache directory");
}

// Resolve defaults -> config file -> explicit flags into st.cfg.
void resolve_common(CommonState& st) {
    std::string simd_from_cfg = "auto";
    std::string config = st.config_path;
    if (config.empty()) {
        if (const char* env = std::getenv("BURSTFUSE_CONFIG"); env && *env) config = env;
    }
    if (!config.empty()) apply_config_file(config, st.cfg, simd_from_cfg);

    if (st.o_simd->count() == 0) st.simd = simd_from_cfg;
    if (st.o_threads->count()) st.cfg.threads = st.threads;
    if (st.o_zoom->count()) {
        if (st.zoom < 1.0 || st.zoom > 3.0) throw UsageError("--zoom must be in [1, 3]");
        st.cfg.zoom = st.zoom;
    }
    if (st.o_frame_cap->count()) {
        if (st.frame_cap < 1) throw UsageError("--frames must be >= 1");
        st.cfg.frame_cap = st.frame_cap;
    }
    if (st.no_robustness) st.cfg.robustness = false;
    if (st.o_loss->count()) st.cfg.loss_threshold = st.loss_threshold;
    if (st.o_tile->count()) {
        if (st.tile_size != 0 && (st.tile_size < 8 || st.tile_size % 2 != 0)) {
            throw UsageError("--tile-size must be 0 (auto) or an even value >= 8");
        }
        st.cfg.tile_size_override = st.tile_size;
    }
    if (st.o_snr->count()) st.cfg.snr_override = st.snr;
    if (st.o_radius->count()) st.cfg.align.search_radius = st.search_radius;
    if (st.o_levels->count()) st.cfg.align.levels = st.pyramid_levels;
    if (st.o_lk->count()) st.cfg.align.lk_iters = st.lk_iters;
    if (st.finish) st.cfg.finish = true;
    if (st.o_cache->count()) st.cfg.cache_dir = st.cache_dir;

    simd::select_kernels(st.simd);
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw UsageError(std::string("bad ") + what + " list entry '" + cell + "'");
        }
    }
    if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    for (double v : parse_double_list(s, what)) out.push_back(static_cast<int>(v));
    return out;
}

void print_report_summary(const BenchReport& report) {
    // mean psnr/ssim per config id, in first-seen order
    std::vector<std::string> order;
    for (const BenchRow& row : report.rows) {
        if (std::find(order.begin(), order.end(), row.config_id) == order.end()) {
            order.push_back(row.config_id);
        }
    }
    for (const std::string& config : order) {
        double psnr = 0, ssim = 0;
        int n = 0;
        for (const BenchRow& row : report.rows) {
            if (row.config_id != config) continue;
            psnr += row.psnr_db;
            ssim += row.ssim;
            ++n;
        }
        std::printf("%-16s mean psnr %6.2f dB   mean ssim %.4f   (%d images)\n", config.c_str(),
                    psnr / n, ssim / n, n);
    }
}

// --- subcommand runners ----------------------------------------------------

int run_merge(CommonState& st, const std::string& input, const std::string& output,
              const std::string& offsets_csv, const std::string& fields_csv,
              const std::string& diagnostics_csv, const std::string& debug_kernels,
              const std::string& debug_robustness) {
    resolve_common(st);
    const Burst burst = load_burst_dir(input, 0);

    std::vector<AlignmentField> fields;
    const std::vector<AlignmentField>* fields_ptr = nullptr;
    if (!offsets_csv.empty() && !fields_csv.empty()) {
        throw UsageError("--offsets and --fields are mutually exclusive");
    }
    if (!offsets_csv.empty()) {
        const std::vector<Vec2f> offsets = read_offsets_csv(offsets_csv);
        fields = oracle_fields(offsets, burst.width(), burst.height(),
                               st.cfg.tile_size_override > 0 ? st.cfg.tile_size_override : 16);
        fields_ptr = &fields;
    } else if (!fields_csv.empty()) {
        fields = read_alignment_csv(fields_csv, burst.width(), burst.height(),
                                    st.cfg.tile_size_override > 0 ? st.cfg.tile_size_override : 16);
        fields_ptr = &fields;
    }

    MergeDiagnostics diag;
    ImageF mask_mean;
    const RgbImage out = merge_burst(burst, st.cfg, &diag, fields_ptr,
                                     debug_robustness.empty() ? nullptr : &mask_mean);
    write_png_rgb16(output, out);

    if (!diagnostics_csv.empty()) write_merge_diagnostics_csv(diagnostics_csv, diag);
    if (!debug_kernels.empty()) {
        const ImageF base_luma = decimate_luma(burst.frames[st.cfg.base_index]);
        ImageF a_map, d_map;
        kernel_debug_maps(base_luma, diag.tuning, &a_map, &d_map);
        write_png_gray8(debug_kernels + "_anisotropy.png", a_map);
        write_png_gray8(debug_kernels + "_denoise.png", d_map);
    }
    if (!debug_robustness.empty()) {
        write_png_gray8(debug_robustness + "_mask.png", mask_mean);
    }

    std::printf("merged %d frames -> %s (%dx%d, snr %.1f, tile %d)\n",
                static_cast<int>(diag.frames.size()), output.c_str(), out.width(), out.height(),
                diag.snr, diag.tuning.tile_size);
    return 0;
}

int run_synth(CommonState& st, const std::string& truth_path, const std::string& out_dir,
              int frames, double sigma, uint64_t seed, double noise_slope, double noise_intercept,
              int crop) {
    resolve_common(st);
    const RgbImage truth = load_truth(truth_path, crop);
    const std::vector<Vec2f> offsets = generate_burst_offsets(frames, sigma, seed);
    NoiseParams noise;
    noise.slope = noise_slope;
    noise.intercept = noise_intercept;
    const Burst burst = synthesize_burst(truth, offsets, noise, seed);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    for (int k = 0; k < burst.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d.pgm", k);
        char sc[32];
        std::snprintf(sc, sizeof(sc), "frame_%03d.txt", k);
        write_bayer_frame((fs::path(out_dir) / name).string(), (fs::path(out_dir) / sc).string(),
                          burst.frames[k], noise);
    }
    write_offsets_csv((fs::path(out_dir) / "offsets.csv").string(), offsets);
    write_png_rgb16((fs::path(out_dir) / "truth.png").string(), truth);
    std::printf("wrote %d frames to %s (%dx%d)\n", burst.size(), out_dir.c_str(), burst.width(),
                burst.height());
    return 0;
}

int run_bench(CommonState& st, const std::string& dataset, const std::string& name,
              const std::string& report_path, int frames, double sigma, uint64_t seed, int crop,
              int border, double noise_slope, double noise_intercept) {
    resolve_common(st);
    BenchOptions opts;
    opts.frames = frames;
    opts.offset_sigma = sigma;
    opts.seed = seed;
    opts.crop = crop;
    opts.border_crop = border;
    opts.noise.slope = noise_slope;
    opts.noise.intercept = noise_intercept;
    opts.merge = st.cfg;

    const BenchReport report = run_synthetic_bench(dataset, name, opts);
    if (!report_path.empty()) write_report_csv(report_path, report);
    print_report_summary(report);
    return 0;
}

int run_corrupt_bench(CommonState& st, const std::string& dataset, const std::string& name,
                      const std::string& report_path, int frames, double sigma, uint64_t seed,
                      int crop, int border, const std::string& tile_list,
                      const std::string& vnoise_list) {
    resolve_common(st);
    BenchOptions opts;
    opts.frames = frames;
    opts.offset_sigma = sigma;
    opts.seed = seed;
    opts.crop = crop;
    opts.border_crop = border;
    opts.merge = st.cfg;

    const std::vector<double> fractions = parse_double_list(tile_list, "tile fraction");
    for (double p : fractions) {
        if (p < 0.0 || p > 1.0) throw UsageError("tile fractions must be in [0, 1]");
    }
    const std::vector<double> sigmas = parse_double_list(vnoise_list, "vector sigma");
    for (double s : sigmas) {
        if (s < 0.0) throw UsageError("vector sigmas must be >= 0");
    }

    const BenchReport report = run_corruption_bench(dataset, name, opts, fractions, sigmas);
    if (!report_path.empty()) write_report_csv(report_path, report);
    print_report_summary(report);
    return 0;
}

int run_frames_sweep_cmd(CommonState& st, const std::string& dataset, const std::string& name,
                         const std::string& report_path, double sigma, uint64_t seed, int crop,
                         int border, const std::string& counts_list) {
    resolve_common(st);
    BenchOptions opts;
    opts.offset_sigma = sigma;
    opts.seed = seed;
    opts.crop = crop;
    opts.border_crop = border;
    opts.merge = st.cfg;

    std::vector<int> counts = parse_int_list(counts_list, "frame count");
    for (int n : counts) {
        if (n < 1) throw UsageError("frame counts must be >= 1");
    }
    std::sort(counts.begin(), counts.end());
    opts.frames = counts.back();
    opts.merge.frame_cap = std::max(opts.merge.frame_cap, counts.back());

    const BenchReport report = run_frames_sweep(dataset, name, opts, counts);
    if (!report_path.empty()) write_report_csv(report_path, report);
    print_report_summary(report);
    return 0;
}

int run_analyze_offsets(CommonState& st, const std::string& input, const std::string& hist_path,
                        int bins, const std::string& offsets_csv,
                        const std::string& fields_out_csv) {
    resolve_common(st);
    const Burst burst = load_burst_dir(input, st.cfg.frame_cap);

    std::vector<AlignmentField> fields;
    if (!offsets_csv.empty()) {
        const std::vector<Vec2f> offsets = read_offsets_csv(offsets_csv);
        fields = oracle_fields(offsets, burst.width(), burst.height(),
                               st.cfg.tile_size_override > 0 ? st.cfg.tile_size_override : 16);
    } else {
        AlignConfig acfg = st.cfg.align;
        acfg.tile_size = st.cfg.tile_size_override > 0 ? st.cfg.tile_size_override : 16;
        fields = align_burst(burst, st.cfg.base_index, acfg);
    }
    if (!fields_out_csv.empty()) write_alignment_csv(fields_out_csv, fields);

    // Skip the base frame: its zero field would swamp bin (0, 0).
    std::vector<AlignmentField> moving(fields.begin() + 1, fields.end());
    if (moving.empty()) throw InvariantError("need at least two frames to analyze offsets");
    const OffsetHistogram hist = subpixel_offset_histogram(moving, bins);
    write_histogram_csv(hist_path, hist);

    const std::vector<long> mx = hist.marginal_x();
    const std::vector<long> my = hist.marginal_y();
    auto occupied = [](const std::vector<long>& m) {
        return std::count_if(m.begin(), m.end(), [](long c) { return c > 0; });
    };
    std::printf("%ld tile vectors, %d bins per axis\n", hist.total, hist.bins);
    std::printf("occupied bins: x %lld/%d, y %lld/%d\n",
                static_cast<long long>(occupied(mx)), hist.bins,
                static_cast<long long>(occupied(my)), hist.bins);
    std::printf("chi-square vs uniform: x %.2f, y %.2f\n", chi_square_uniform(mx),
                chi_square_uniform(my));
    return 0;
}

int run_calibrate_noise(CommonState& st, double slope, double intercept, const std::string& output,
                        int bins, long samples, uint64_t seed) {
    resolve_common(st);
    if (slope < 0.0 || intercept < 0.0) throw UsageError("noise coefficients must be >= 0");
    NoiseParams noise;
    noise.slope = slope;
    noise.intercept = intercept;
    McConfig mc;
    mc.bins = bins;
    mc.samples_per_bin = samples;
    mc.seed = seed;
    const NoiseTables tables = mc_calibrate_tables(noise, mc);
    write_tables_csv(output, tables);
    std::printf("wrote %d bins to %s\n", tables.bins, output.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"burstfuse: motion-robust fusion of raw mosaic bursts into full RGB"};
    app.require_subcommand(1);
    app.set_version_flag("--version", [] {
        return std::string("burstfuse ") + kVersion + " (simd: " + simd::active_kernel_name() + ")";
    });

    // merge
    auto* merge = app.add_subcommand("merge", "fuse a burst directory into an RGB image");
    CommonState merge_st;
    std::string m_input, m_output, m_offsets, m_fields, m_diag, m_dbg_kernels, m_dbg_robust;
    merge->add_option("--input", m_input, "burst directory")->required();
    merge->add_option("--output", m_output, "output PNG path")->required();
    merge->add_option("--offsets", m_offsets, "ground-truth offsets CSV (oracle alignment)");
    merge->add_option("--fields", m_fields, "precomputed alignment CSV");
    merge->add_option("--diagnostics", m_diag, "write per-frame diagnostics CSV");
    merge->add_option("--debug-kernels", m_dbg_kernels, "write kernel heatmaps with this prefix");
    merge->add_option("--debug-robustness", m_dbg_robust, "write mask heatmap with this prefix");
    add_common_options(merge, merge_st);

    // synth
    auto* synth = app.add_subcommand("synth", "synthesize a burst from a truth image");
    CommonState synth_st;
    std::string s_truth, s_outdir;
    int s_frames = 15, s_crop = 0;
    double s_sigma = 2.0, s_slope = 0.0, s_intercept = 0.0;
    uint64_t s_seed = 7;
    synth->add_option("--truth", s_truth, "ground-truth RGB PNG")->required();
    synth->add_option("--output-dir", s_outdir, "burst directory to create")->required();
    synth->add_option("--burst-frames", s_frames, "frames to synthesize");
    synth->add_option("--sigma", s_sigma, "offset standard deviation, px");
    synth->add_option("--seed", s_seed, "RNG seed");
    synth->add_option("--noise-slope", s_slope, "sensor noise variance slope");
    synth->add_option("--noise-intercept", s_intercept, "sensor noise variance intercept");
    synth->add_option("--crop", s_crop, "center-crop the truth first");
    add_common_options(synth, synth_st);

    // bench
    auto* bench = app.add_subcommand("bench", "synthetic-burst quality benchmark");
    CommonState bench_st;
    std::string b_dataset, b_name = "dataset", b_report;
    int b_frames = 15, b_crop = 0, b_border = 8;
    double b_sigma = 2.0, b_slope = 0.0, b_intercept = 0.0;
    uint64_t b_seed = 7;
    bench->add_option("--dataset", b_dataset, "directory of truth PNGs")->required();
    bench->add_option("--name", b_name, "dataset label for the report");
    bench->add_option("--report", b_report, "report CSV path");
    bench->add_option("--burst-frames", b_frames, "frames per burst");
    bench->add_option("--sigma", b_sigma, "offset standard deviation, px");
    bench->add_option("--seed", b_seed, "RNG seed");
    bench->add_option("--crop", b_crop, "center crop, px (0 = full)");
    bench->add_option("--border-crop", b_border, "metric border crop, px");
    bench->add_option("--noise-slope", b_slope, "sensor noise variance slope");
    bench->add_option("--noise-intercept", b_intercept, "sensor noise variance intercept");
    add_common_options(bench, bench_st);

    // corrupt-bench
    auto* corrupt = app.add_subcommand("corrupt-bench", "robustness under corrupted alignment");
    CommonState corrupt_st;
    std::string c_dataset, c_name = "dataset", c_report;
    std::string c_tiles = "0,0.1,0.2,0.3,0.4,0.5";
    std::string c_vnoise = "0.05,0.1,0.15,0.2,0.25";
    int c_frames = 15, c_crop = 0, c_border = 8;
    double c_sigma = 2.0;
    uint64_t c_seed = 7;
    corrupt->add_option("--dataset", c_dataset, "directory of truth PNGs")->required();
    corrupt->add_option("--name", c_name, "dataset label for the report");
    corrupt->add_option("--report", c_report, "report CSV path");
    corrupt->add_option("--burst-frames", c_frames, "frames per burst");
    corrupt->add_option("--sigma", c_sigma, "offset standard deviation, px");
    corrupt->add_option("--seed", c_seed, "RNG seed");
    corrupt->add_option("--crop", c_crop, "center crop, px (0 = full)");
    corrupt->add_option("--border-crop", c_border, "metric border crop, px");
    corrupt->add_option("--tile-fractions", c_tiles, "comma list of replaced-tile fractions");
    corrupt->add_option("--vector-sigmas", c_vnoise, "comma list of vector noise sigmas");
    add_common_options(corrupt, corrupt_st);

    // frames-sweep
    auto* sweep = app.add_subcommand("frames-sweep", "quality as a function of burst length");
    CommonState sweep_st;
    std::string f_dataset, f_name = "dataset", f_report, f_counts = "1,2,4,8,12,15";
    int f_crop = 0, f_border = 8;
    double f_sigma = 2.0;
    uint64_t f_seed = 7;
    sweep->add_option("--dataset", f_dataset, "directory of truth PNGs")->required();
    sweep->add_option("--name", f_name, "dataset label for the report");
    sweep->add_option("--report", f_report, "report CSV path");
    sweep->add_option("--counts", f_counts, "comma list of prefix lengths");
    sweep->add_option("--sigma", f_sigma, "offset standard deviation, px");
    sweep->add_option("--seed", f_seed, "RNG seed");
    sweep->add_option("--crop", f_crop, "center crop, px (0 = full)");
    sweep->add_option("--border-crop", f_border, "metric border crop, px");
    add_common_options(sweep, sweep_st);

    // analyze-offsets
    auto* analyze = app.add_subcommand("analyze-offsets", "subpixel offset coverage statistics");
    CommonState analyze_st;
    std::string a_input, a_hist, a_offsets, a_fields_out;
    int a_bins = 10;
    analyze->add_option("--input", a_input, "burst directory")->required();
    analyze->add_option("--hist", a_hist, "histogram CSV path")->required();
    analyze->add_option("--bins", a_bins, "bins per axis");
    analyze->add_option("--offsets", a_offsets, "use ground-truth offsets CSV instead of aligning");
    analyze->add_option("--fields-out", a_fields_out, "also write the alignment fields CSV");
    add_common_options(analyze, analyze_st);

    // calibrate-noise
    auto* calib = app.add_subcommand("calibrate-noise", "Monte Carlo noise statistic tables");
    CommonState calib_st;
    std::string n_output;
    double n_slope = 0.0, n_intercept = 0.0;
    int n_bins = 64;
    long n_samples = 100000;
    uint64_t n_seed = 0x6d63;
    calib->add_option("--slope", n_slope, "noise variance slope")->required();
    calib->add_option("--intercept", n_intercept, "noise variance intercept")->required();
    calib->add_option("--output", n_output, "tables CSV path")->required();
    calib->add_option("--bins", n_bins, "brightness bins");
    calib->add_option("--samples", n_samples, "Monte Carlo samples per bin");
    calib->add_option("--seed", n_seed, "RNG seed");
    add_common_options(calib, calib_st);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "burstfuse: " << e.what() << "\n";
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (merge->parsed()) {
            return run_merge(merge_st, m_input, m_output, m_offsets, m_fields, m_diag,
                             m_dbg_kernels, m_dbg_robust);
        }
        if (synth->parsed()) {
            return run_synth(synth_st, s_truth, s_outdir, s_frames, s_sigma, s_seed, s_slope,
                             s_intercept, s_crop);
        }
        if (bench->parsed()) {
            return run_bench(bench_st, b_dataset, b_name, b_report, b_frames, b_sigma, b_seed,
                             b_crop, b_border, b_slope, b_intercept);
        }
        if (corrupt->parsed()) {
            return run_corrupt_bench(corrupt_st, c_dataset, c_name, c_report, c_frames, c_sigma,
                                     c_seed, c_crop, c_border, c_tiles, c_vnoise);
        }
        if (sweep->parsed()) {
            return run_frames_sweep_cmd(sweep_st, f_dataset, f_name, f_report, f_sigma, f_seed,
                                        f_crop, f_border, f_counts);
        }
        if (analyze->parsed()) {
            return run_analyze_offsets(analyze_st, a_input, a_hist, a_bins, a_offsets,
                                       a_fields_out);
        }
        if (calib->parsed()) {
            return run_calibrate_noise(calib_st, n_slope, n_intercept, n_output, n_bins, n_samples,
                                       n_seed);
        }
        throw UsageError("no subcommand selected");
    } catch (const Error& e) {
        std::cerr << "burstfuse: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "burstfuse: internal error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::invariant);
    }
}
