#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "burstfuse/raw.hpp"

namespace burstfuse {

// Per-brightness lookup tables for the motion-robustness statistics, built by
// Monte Carlo simulation of the sensor noise model:
//   sigma_md  expected 3x3 spatial standard deviation of pure noise
//             (sample-std bias corrected), after [0, 1] clipping
//   d_md      expected |difference| of two independent 3x3 noisy patch means
struct NoiseTables {
    int bins = 0;
    std::vector<double> sigma_md;
    std::vector<double> d_md;

    // Linear interpolation between bin centers, clamped at the ends.
    double lookup_sigma(double brightness) const;
    double lookup_d(double brightness) const;
};

struct McConfig {
    int bins = 64;
    long samples_per_bin = 100000;
    uint64_t seed = 0x6d63;
};

NoiseTables mc_calibrate_tables(const NoiseParams& noise, const McConfig& cfg);

// Disk-cached variant keyed by the full parameter set; cache_dir "" means
// $BURSTFUSE_CACHE_DIR or ~/.cache/burstfuse. Cache misses compute and write
// best-effort.
NoiseTables load_or_compute_tables(const NoiseParams& noise, const McConfig& cfg,
                                   const std::string& cache_dir = "");

void write_tables_csv(const std::string& path, const NoiseTables& tables,
                      const std::string& param_comment = "");
NoiseTables read_tables_csv(const std::string& path, std::string* param_comment = nullptr);

// Linear-domain SNR mean/sigma at the given brightness, capped at 100
// (noiseless inputs hit the cap).
double estimate_snr(double mean_brightness, const NoiseParams& noise);

// Merge tuning; the SNR-dependent members interpolate linearly over
// SNR in [6, 30] between a noisy and a clean endpoint set.
struct TuningParams {
    int tile_size = 16;       // snapped to {16, 32, 64}
    double k_detail = 0.25;   // px
    double k_denoise = 3.0;
    double d_th = 0.001;
    double d_tr = 0.006;
    double k_stretch = 4.0;
    double k_shrink = 2.0;
    double t = 0.12;
    double s1 = 12.0;
    double s2 = 2.0;
    double m_th = 0.8;        // px
};

TuningParams tuning_for_snr(double snr);

}  // namespace burstfuse
