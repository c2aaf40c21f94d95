#include "burstfuse/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "burstfuse/errors.hpp"
#include "burstfuse/filters.hpp"
#include "burstfuse/image_io.hpp"
#include "burstfuse/metrics.hpp"
#include "burstfuse/synth.hpp"

namespace fs = std::filesystem;

namespace burstfuse {
namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string image_id_of(const std::string& path) {
    return fs::path(path).stem().string();
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

BenchRow score_row(const std::string& dataset, const std::string& image_id,
                   const std::string& config_id, const RgbImage& out, const RgbImage& truth,
                   int border, double wall_ms) {
    BenchRow row;
    row.dataset = dataset;
    row.image_id = image_id;
    row.config_id = config_id;
    const RgbImage oc = crop_border(out, border);
    const RgbImage tc = crop_border(truth, border);
    row.psnr_db = psnr_rgb(oc, tc);
    row.ssim = ssim_rgb(oc, tc);
    row.sharpness = sharpness(oc);
    row.wall_ms = wall_ms;
    return row;
}

std::string format_config(const char* prefix, double value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s_%.2f", prefix, value);
    return buf;
}

// synthesize_burst displaces content by round(offset) (nearest-neighbor, so
// the truth stays exactly representable); the true alignment of the rendered
// frames is therefore the rounded offset, and that is what the ground-truth
// fields must carry.
std::vector<Vec2f> content_offsets(const std::vector<Vec2f>& offsets) {
    std::vector<Vec2f> out;
    out.reserve(offsets.size());
    for (const Vec2f& o : offsets) {
        out.emplace_back(static_cast<float>(round_to_int(o.x)),
                         static_cast<float>(round_to_int(o.y)));
    }
    return out;
}

}  // namespace

const BenchRow* BenchReport::find(const std::string& image_id, const std::string& config_id) const {
    for (const BenchRow& row : rows) {
        if (row.image_id == image_id && row.config_id == config_id) return &row;
    }
    return nullptr;
}

void write_report_csv(const std::string& path, const BenchReport& report) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "# border_crop=" << report.border_crop << "\n";
    f << "dataset,image_id,config_id,psnr_db,ssim,sharpness,wall_ms\n";
    f.precision(10);
    for (const BenchRow& row : report.rows) {
        f << row.dataset << "," << row.image_id << "," << row.config_id << "," << row.psnr_db
          << "," << row.ssim << "," << row.sharpness << "," << row.wall_ms << "\n";
    }
    if (!f) throw IoError("failed writing '" + path + "'");
}

std::vector<std::string> list_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("dataset directory '" + dir + "' does not exist");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw IoError("no .png truth images in '" + dir + "'");
    return paths;
}

RgbImage load_truth(const std::string& path, int crop) {
    RgbImage img = read_png_rgb(path);
    int w = img.width();
    int h = img.height();
    int target_w = crop > 0 ? std::min(crop, w) : w;
    int target_h = crop > 0 ? std::min(crop, h) : h;
    target_w -= target_w % 2;
    target_h -= target_h % 2;
    if (target_w < 2 || target_h < 2) throw InvariantError("truth image too small after crop");
    if (target_w == w && target_h == h) return img;

    const int x0 = (w - target_w) / 2;
    const int y0 = (h - target_h) / 2;
    RgbImage out(target_w, target_h);
    for (int c = 0; c < 3; ++c) {
        const ImageF& src = img.plane(c);
        ImageF& dst = out.plane(c);
        for (int y = 0; y < target_h; ++y) {
            const float* s = src.row(y + y0) + x0;
            std::copy(s, s + target_w, dst.row(y));
        }
    }
    return out;
}

BenchReport run_synthetic_bench(const std::string& dataset_dir, const std::string& dataset_name,
                                const BenchOptions& opts) {
    BenchReport report;
    report.border_crop = opts.border_crop;
    const std::vector<std::string> paths = list_dataset(dataset_dir);

    for (size_t i = 0; i < paths.size(); ++i) {
        const RgbImage truth = load_truth(paths[i], opts.crop);
        const std::string id = image_id_of(paths[i]);
        const uint64_t seed = mix_seed(opts.seed, i);

        const std::vector<Vec2f> offsets =
            generate_burst_offsets(opts.frames, opts.offset_sigma, seed);
        const Burst burst = synthesize_burst(truth, offsets, opts.noise, seed);

        MergeConfig cfg = opts.merge;

        // Full burst, ground-truth alignment.
        {
            MergeDiagnostics diag;
            const std::vector<AlignmentField> fields =
                oracle_fields(content_offsets(offsets), burst.width(), burst.height(),
                              cfg.tile_size_override > 0 ? cfg.tile_size_override : 16);
            const double t0 = now_ms();
            const RgbImage out = merge_burst(burst, cfg, &diag, &fields);
            report.rows.push_back(
                score_row(dataset_name, id, "oracle", out, truth, opts.border_crop, now_ms() - t0));
        }
        // Full burst, estimated alignment.
        {
            const double t0 = now_ms();
            const RgbImage out = merge_burst(burst, cfg);
            report.rows.push_back(
                score_row(dataset_name, id, "auto", out, truth, opts.border_crop, now_ms() - t0));
        }
        // Single frame baseline.
        {
            Burst single;
            single.noise = burst.noise;
            single.frames.push_back(burst.frames.front());
            const double t0 = now_ms();
            const RgbImage out = merge_burst(single, cfg);
            report.rows.push_back(
                score_row(dataset_name, id, "single", out, truth, opts.border_crop, now_ms() - t0));
        }
    }
    return report;
}

BenchReport run_corruption_bench(const std::string& dataset_dir, const std::string& dataset_name,
                                 const BenchOptions& opts,
                                 const std::vector<double>& tile_fractions,
                                 const std::vector<double>& vector_sigmas) {
    BenchReport report;
    report.border_crop = opts.border_crop;
    const std::vector<std::string> paths = list_dataset(dataset_dir);

    for (size_t i = 0; i < paths.size(); ++i) {
        const RgbImage truth = load_truth(paths[i], opts.crop);
        const std::string id = image_id_of(paths[i]);
        const uint64_t seed = mix_seed(opts.seed, i);

        const std::vector<Vec2f> offsets =
            generate_burst_offsets(opts.frames, opts.offset_sigma, seed);
        const Burst burst = synthesize_burst(truth, offsets, opts.noise, seed);
        const MergeConfig cfg = opts.merge;
        const int tile_size = cfg.tile_size_override > 0 ? cfg.tile_size_override : 16;
        const std::vector<AlignmentField> clean =
            oracle_fields(content_offsets(offsets), burst.width(), burst.height(), tile_size);

        {
            const double t0 = now_ms();
            const RgbImage out = merge_burst(burst, cfg, nullptr, &clean);
            report.rows.push_back(
                score_row(dataset_name, id, "clean", out, truth, opts.border_crop, now_ms() - t0));
        }

        auto run_corrupted = [&](const std::string& config_id, auto&& corrupt_one) {
            std::vector<AlignmentField> fields = clean;
            for (size_t k = 1; k < fields.size(); ++k) {
                fields[k] = corrupt_one(fields[k], mix_seed(seed, 1000 + k));
            }
            const double t0 = now_ms();
            const RgbImage out = merge_burst(burst, cfg, nullptr, &fields);
            report.rows.push_back(score_row(dataset_name, id, config_id, out, truth,
                                            opts.border_crop, now_ms() - t0));
        };

        for (double p : tile_fractions) {
            run_corrupted(format_config("tile", p), [p](const AlignmentField& f, uint64_t s) {
                return corrupt_tile_replace(f, p, s);
            });
        }
        for (double sg : vector_sigmas) {
            run_corrupted(format_config("vnoise", sg), [sg](const AlignmentField& f, uint64_t s) {
                return corrupt_vector_noise(f, sg, s);
            });
        }
    }
    return report;
}

BenchReport run_frames_sweep(const std::string& dataset_dir, const std::string& dataset_name,
                             const BenchOptions& opts, const std::vector<int>& frame_counts) {
    BenchReport report;
    report.border_crop = opts.border_crop;
    if (frame_counts.empty()) throw InvariantError("frames sweep needs at least one count");
    const int max_n = *std::max_element(frame_counts.begin(), frame_counts.end());
    const std::vector<std::string> paths = list_dataset(dataset_dir);

    for (size_t i = 0; i < paths.size(); ++i) {
        const RgbImage truth = load_truth(paths[i], opts.crop);
        const std::string id = image_id_of(paths[i]);
        const uint64_t seed = mix_seed(opts.seed, i);

        const std::vector<Vec2f> offsets = generate_burst_offsets(max_n, opts.offset_sigma, seed);
        const Burst burst = synthesize_burst(truth, offsets, opts.noise, seed);
        const MergeConfig cfg = opts.merge;
        const int tile_size = cfg.tile_size_override > 0 ? cfg.tile_size_override : 16;
        const std::vector<AlignmentField> fields =
            oracle_fields(content_offsets(offsets), burst.width(), burst.height(), tile_size);

        // One accumulation pass; snapshot the output at each requested prefix.
        MergeEngine engine(burst.frames.front(), burst.noise, cfg);
        std::vector<std::pair<int, RgbImage>> snapshots;
        const double t0 = now_ms();
        for (int k = 0; k < max_n; ++k) {
            engine.accumulate(burst.frames[k], fields[k], k == 0);
            const int n = k + 1;
            if (std::find(frame_counts.begin(), frame_counts.end(), n) != frame_counts.end()) {
                snapshots.emplace_back(n, engine.finalize());
            }
        }
        const double wall = now_ms() - t0;

        const RgbImage& full = snapshots.back().second;
        for (const auto& [n, out] : snapshots) {
            char label[16];
            std::snprintf(label, sizeof(label), "n%02d", n);
            report.rows.push_back(
                score_row(dataset_name, id, label, out, truth, opts.border_crop, wall));
            char label_vs[32];
            std::snprintf(label_vs, sizeof(label_vs), "n%02d_vs_full", n);
            report.rows.push_back(
                score_row(dataset_name, id, label_vs, out, full, opts.border_crop, wall));
        }
    }
    return report;
}

RgbImage make_synthetic_truth(int width, int height, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    RgbImage img(width, height);

    // Smooth background: a few shared low-frequency gratings with per-channel
    // gains, so channels are correlated like natural photographs.
    struct Wave {
        double fx, fy, phase, gain[3];
    };
    std::vector<Wave> waves(6);
    for (Wave& wv : waves) {
        const double angle = uni(rng) * 2.0 * 3.14159265358979;
        const double freq = (0.5 + 2.5 * uni(rng)) * 2.0 * 3.14159265358979 / std::max(width, height);
        wv.fx = std::cos(angle) * freq;
        wv.fy = std::sin(angle) * freq;
        wv.phase = uni(rng) * 2.0 * 3.14159265358979;
        for (double& g : wv.gain) g = 0.04 + 0.10 * uni(rng);
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double v[3] = {0.5, 0.5, 0.5};
            for (const Wave& wv : waves) {
                const double s = std::sin(wv.fx * x + wv.fy * y + wv.phase);
                for (int c = 0; c < 3; ++c) v[c] += wv.gain[c] * s;
            }
            img.r.at(x, y) = static_cast<float>(v[0]);
            img.g.at(x, y) = static_cast<float>(v[1]);
            img.b.at(x, y) = static_cast<float>(v[2]);
        }
    }

    // Soft-edged discs and rotated bars in saturated colors.
    const int shapes = 12 + static_cast<int>(uni(rng) * 6);
    for (int s = 0; s < shapes; ++s) {
        const double cx = uni(rng) * width;
        const double cy = uni(rng) * height;
        const double col[3] = {0.08 + 0.84 * uni(rng), 0.08 + 0.84 * uni(rng),
                               0.08 + 0.84 * uni(rng)};
        const bool disc = uni(rng) < 0.5;
        const double radius = (0.03 + 0.10 * uni(rng)) * std::min(width, height);
        const double angle = uni(rng) * 3.14159265358979;
        const double ca = std::cos(angle);
        const double sa = std::sin(angle);
        const double half_len = radius * (1.5 + 2.0 * uni(rng));
        const double half_wid = std::max(1.5, radius * 0.25);

        const int x0 = std::max(0, static_cast<int>(cx - half_len - radius - 2));
        const int x1 = std::min(width - 1, static_cast<int>(cx + half_len + radius + 2));
        const int y0 = std::max(0, static_cast<int>(cy - half_len - radius - 2));
        const int y1 = std::min(height - 1, static_cast<int>(cy + half_len + radius + 2));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double dist;
                if (disc) {
                    dist = std::hypot(x - cx, y - cy) - radius;
                } else {
                    const double lx = (x - cx) * ca + (y - cy) * sa;
                    const double ly = -(x - cx) * sa + (y - cy) * ca;
                    dist = std::max(std::abs(lx) - half_len, std::abs(ly) - half_wid);
                }
                // ~1.2 px soft edge keeps the chart band-limited enough to
                // survive mosaicking without being trivially smooth.
                const double alpha = std::clamp(0.5 - dist / 1.2, 0.0, 1.0);
                if (alpha <= 0.0) continue;
                const double a = alpha * 0.85;
                img.r.at(x, y) = static_cast<float>(img.r.at(x, y) * (1 - a) + col[0] * a);
                img.g.at(x, y) = static_cast<float>(img.g.at(x, y) * (1 - a) + col[1] * a);
                img.b.at(x, y) = static_cast<float>(img.b.at(x, y) * (1 - a) + col[2] * a);
            }
        }
    }

    // Fine oriented gratings (fabric, fences, shingles): detail in the
    // 0.16-0.23 cycles/px band, which single-frame interpolation of the
    // red/blue planes (2 px sample pitch) cannot represent but a multi-frame
    // merge with sub-pixel sample diversity can.  The first four patches sit
    // on jittered quadrant centers so every image carries spread-out detail.
    const int gratings = 5 + static_cast<int>(uni(rng) * 3.0);
    for (int gi = 0; gi < gratings; ++gi) {
        double cx, cy;
        if (gi < 4) {
            cx = ((gi % 2 ? 0.75 : 0.25) + (uni(rng) - 0.5) * 0.3) * width;
            cy = ((gi / 2 ? 0.75 : 0.25) + (uni(rng) - 0.5) * 0.3) * height;
        } else {
            cx = uni(rng) * width;
            cy = uni(rng) * height;
        }
        const double radius = (0.08 + 0.06 * uni(rng)) * std::min(width, height);
        const double angle = uni(rng) * 3.14159265358979;
        const double omega = 2.0 * 3.14159265358979 * (0.16 + 0.07 * uni(rng));
        const double phase = uni(rng) * 2.0 * 3.14159265358979;
        const double amp = 0.11 + 0.04 * uni(rng);
        const double gain[3] = {amp * (0.9 + 0.2 * uni(rng)), amp,
                                amp * (0.9 + 0.2 * uni(rng))};
        const double ca = std::cos(angle);
        const double sa = std::sin(angle);

        const int x0 = std::max(0, static_cast<int>(cx - radius - 1));
        const int x1 = std::min(width - 1, static_cast<int>(cx + radius + 1));
        const int y0 = std::max(0, static_cast<int>(cy - radius - 1));
        const int y1 = std::min(height - 1, static_cast<int>(cy + radius + 1));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double r = std::hypot(x - cx, y - cy);
                // 4 px envelope ramp keeps the patch border itself band-limited.
                const double alpha = std::clamp((radius - r) / 4.0, 0.0, 1.0);
                if (alpha <= 0.0) continue;
                const double s =
                    alpha * std::sin(omega * (ca * x + sa * y) + phase);
                img.r.at(x, y) = static_cast<float>(
                    std::clamp(img.r.at(x, y) + gain[0] * s, 0.02, 0.98));
                img.g.at(x, y) = static_cast<float>(
                    std::clamp(img.g.at(x, y) + gain[1] * s, 0.02, 0.98));
                img.b.at(x, y) = static_cast<float>(
                    std::clamp(img.b.at(x, y) + gain[2] * s, 0.02, 0.98));
            }
        }
    }

    // Band-limited texture: blurred white noise, shared across channels with
    // small per-channel gain differences.
    ImageF noise(width, height);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int y = 0; y < height; ++y) {
        float* row = noise.row(y);
        for (int x = 0; x < width; ++x) row[x] = static_cast<float>(gauss(rng));
    }
    const ImageF textured = gaussian_blur(noise, 1.2);
    const double tex_gain[3] = {0.040, 0.044, 0.040};
    for (int c = 0; c < 3; ++c) {
        ImageF& plane = img.plane(c);
        for (int y = 0; y < height; ++y) {
            float* row = plane.row(y);
            const float* tex = textured.row(y);
            for (int x = 0; x < width; ++x) {
                row[x] = static_cast<float>(
                    std::clamp(row[x] + tex_gain[c] * tex[x], 0.02, 0.98));
            }
        }
    }
    return img;
}

void write_proxy_dataset(const std::string& dir, int count, int size, uint64_t seed) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%02d.png", i);
        const RgbImage truth = make_synthetic_truth(size, size, mix_seed(seed, i));
        write_png_rgb16((fs::path(dir) / name).string(), truth);
    }
}

std::vector<ScalingPoint> run_scaling_harness(const std::vector<int>& sizes,
                                              const std::vector<int>& frame_counts, uint64_t seed,
                                              const MergeConfig& merge_cfg) {
    std::vector<ScalingPoint> points;
    for (size_t i = 0; i < sizes.size(); ++i) {
        const int size = sizes[i];
        for (int frames : frame_counts) {
            const RgbImage truth = make_synthetic_truth(size, size, mix_seed(seed, i));
            const std::vector<Vec2f> offsets = generate_burst_offsets(frames, 2.0, seed);
            const Burst burst = synthesize_burst(truth, offsets, NoiseParams{}, seed);
            const std::vector<AlignmentField> fields =
                oracle_fields(content_offsets(offsets), size, size, 16);

            MergeDiagnostics diag;
            merge_burst(burst, merge_cfg, &diag, &fields);

            ScalingPoint pt;
            pt.mpix = static_cast<double>(size) * size / 1e6;
            pt.frames = frames;
            pt.wall_per_frame_ms = diag.accumulate_ms / frames;
            pt.peak_bytes = diag.peak_bytes;
            points.push_back(pt);
        }
    }
    return points;
}

double linear_fit_r2(const std::vector<std::pair<double, double>>& pts) {
    const size_t n = pts.size();
    if (n < 2) return 1.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double mean_y = sy / n;
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (const auto& [x, y] : pts) {
        const double f = slope * x + intercept;
        ss_res += (y - f) * (y - f);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    if (ss_tot == 0.0) return 1.0;
    return 1.0 - ss_res / ss_tot;
}

}  // namespace burstfuse
