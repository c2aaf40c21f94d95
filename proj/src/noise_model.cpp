#include "burstfuse/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "burstfuse/errors.hpp"

namespace fs = std::filesystem;

namespace burstfuse {
namespace {

// E[sample std of 9 gaussians] = c4(9) * sigma, for the (n-1)-denominator std.
constexpr double kSampleStdC4of9 = 0.9693106997139539;

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double interp_table(const std::vector<double>& table, int bins, double brightness) {
    if (table.empty()) return 0.0;
    const double pos = brightness * bins - 0.5;  // bin centers at (i + 0.5) / bins
    if (pos <= 0.0) return table.front();
    if (pos >= bins - 1) return table.back();
    const int i = static_cast<int>(pos);
    const double f = pos - i;
    return table[i] + (table[static_cast<size_t>(i) + 1] - table[i]) * f;
}

std::string params_comment(const NoiseParams& noise, const McConfig& cfg) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "slope=%.12g intercept=%.12g bins=%d samples=%ld seed=%llu",
                  noise.slope, noise.intercept, cfg.bins, cfg.samples_per_bin,
                  static_cast<unsigned long long>(cfg.seed));
    return buf;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string default_cache_dir() {
    if (const char* env = std::getenv("BURSTFUSE_CACHE_DIR"); env && *env) return env;
    if (const char* home = std::getenv("HOME"); home && *home) {
        return std::string(home) + "/.cache/burstfuse";
    }
    return ".burstfuse-cache";
}

}  // namespace

double NoiseTables::lookup_sigma(double brightness) const {
    return interp_table(sigma_md, bins, brightness);
}

double NoiseTables::lookup_d(double brightness) const { return interp_table(d_md, bins, brightness); }

NoiseTables mc_calibrate_tables(const NoiseParams& noise, const McConfig& cfg) {
    if (cfg.bins < 1 || cfg.samples_per_bin < 1) {
        throw InvariantError("noise calibration needs positive bins and samples");
    }
    NoiseTables tables;
    tables.bins = cfg.bins;
    tables.sigma_md.assign(cfg.bins, 0.0);
    tables.d_md.assign(cfg.bins, 0.0);

    if (noise.slope <= 0.0 && noise.intercept <= 0.0) return tables;  // noiseless shortcut

    for (int bin = 0; bin < cfg.bins; ++bin) {
        const double b = (bin + 0.5) / cfg.bins;
        const double sigma = std::sqrt(std::max(0.0, noise.slope * b + noise.intercept));
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<uint64_t>(bin)));
        std::normal_distribution<double> unit(0.0, 1.0);

        auto draw_patch = [&](double* mean_out) {
            // One 3x3 patch of pure noise around brightness b, clipped like
            // the sensor pipeline clips.
            double sum = 0.0, sum_sq = 0.0;
            for (int i = 0; i < 9; ++i) {
                const double v = std::clamp(b + sigma * unit(rng), 0.0, 1.0);
                sum += v;
                sum_sq += v * v;
            }
            const double mean = sum / 9.0;
            if (mean_out) *mean_out = mean;
            const double ss = std::max(0.0, sum_sq - 9.0 * mean * mean);
            return std::sqrt(ss / 8.0);
        };

        double acc_std = 0.0;
        double acc_absdiff = 0.0;
        for (long s = 0; s < cfg.samples_per_bin; ++s) {
            double m1 = 0.0, m2 = 0.0;
            acc_std += draw_patch(&m1);
            draw_patch(&m2);
            acc_absdiff += std::abs(m1 - m2);
        }
        tables.sigma_md[bin] = acc_std / cfg.samples_per_bin / kSampleStdC4of9;
        tables.d_md[bin] = acc_absdiff / cfg.samples_per_bin;
    }
    return tables;
}

void write_tables_csv(const std::string& path, const NoiseTables& tables,
                      const std::string& param_comment) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    if (!param_comment.empty()) f << "# " << param_comment << "\n";
    f << "brightness,sigma_md,d_md\n";
    f.precision(12);
    for (int i = 0; i < tables.bins; ++i) {
        f << (i + 0.5) / tables.bins << "," << tables.sigma_md[i] << "," << tables.d_md[i] << "\n";
    }
    if (!f) throw IoError("failed writing '" + path + "'");
}

NoiseTables read_tables_csv(const std::string& path, std::string* param_comment) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open noise tables '" + path + "'");
    NoiseTables tables;
    std::string line;
    bool have_header = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (param_comment) *param_comment = line.size() > 2 ? line.substr(2) : "";
            continue;
        }
        if (!have_header) {  // brightness,sigma_md,d_md
            have_header = true;
            continue;
        }
        std::istringstream ss(line);
        std::string cell;
        try {
            std::getline(ss, cell, ',');  // brightness (implied by row order)
            std::getline(ss, cell, ',');
            tables.sigma_md.push_back(std::stod(cell));
            if (!std::getline(ss, cell, ',')) throw std::invalid_argument(line);
            tables.d_md.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw IoError("malformed noise table row '" + line + "' in '" + path + "'");
        }
    }
    tables.bins = static_cast<int>(tables.sigma_md.size());
    if (tables.bins == 0) throw IoError("noise tables '" + path + "' have no rows");
    return tables;
}

NoiseTables load_or_compute_tables(const NoiseParams& noise, const McConfig& cfg,
                                   const std::string& cache_dir) {
    const std::string comment = params_comment(noise, cfg);
    const std::string dir = cache_dir.empty() ? default_cache_dir() : cache_dir;
    char name[64];
    std::snprintf(name, sizeof(name), "tables_%016llx.csv",
                  static_cast<unsigned long long>(fnv1a(comment)));
    const fs::path path = fs::path(dir) / name;

    std::error_code ec;
    if (fs::exists(path, ec)) {
        try {
            std::string stored;
            NoiseTables tables = read_tables_csv(path.string(), &stored);
            if (stored == comment && tables.bins == cfg.bins) return tables;
        } catch (const IoError&) {
            // fall through to recompute
        }
    }

    NoiseTables tables = mc_calibrate_tables(noise, cfg);
    fs::create_directories(dir, ec);
    try {
        write_tables_csv(path.string(), tables, comment);
    } catch (const IoError&) {
        // cache writes are best-effort
    }
    return tables;
}

double estimate_snr(double mean_brightness, const NoiseParams& noise) {
    constexpr double kCap = 100.0;
    const double mu = std::max(0.0, mean_brightness);
    const double var = noise.slope * mu + noise.intercept;
    if (var <= 0.0) return kCap;
    return std::min(kCap, mu / std::sqrt(var));
}

TuningParams tuning_for_snr(double snr) {
    const double s = std::clamp(snr, 6.0, 30.0);
    const double f = (30.0 - s) / 24.0;  // 1 at the noisy end, 0 at the clean end

    TuningParams p;
    p.k_detail = 0.25 + f * (0.33 - 0.25);
    p.k_denoise = 3.0 + f * (5.0 - 3.0);
    p.d_th = 0.001 + f * (0.010 - 0.001);
    p.d_tr = 0.006 + f * (0.020 - 0.006);

    const double ts_linear = 16.0 + f * (64.0 - 16.0);
    int best = 16;
    double best_dist = std::abs(ts_linear - 16.0);
    for (int cand : {32, 64}) {
        const double dist = std::abs(ts_linear - cand);
        // ties snap to the larger tile (the safer choice for alignment)
        if (dist <= best_dist) {
            best = cand;
            best_dist = dist;
        }
    }
    p.tile_size = best;
    return p;
}

}  // namespace burstfuse
