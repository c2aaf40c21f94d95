#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "burstfuse/merge.hpp"
#include "burstfuse/raw.hpp"

namespace burstfuse {

struct BenchRow {
    std::string dataset;
    std::string image_id;
    std::string config_id;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double sharpness = 0.0;
    double wall_ms = 0.0;
};

struct BenchReport {
    int border_crop = 8;
    std::vector<BenchRow> rows;

    const BenchRow* find(const std::string& image_id, const std::string& config_id) const;
};

void write_report_csv(const std::string& path, const BenchReport& report);

struct BenchOptions {
    int frames = 15;
    double offset_sigma = 2.0;
    uint64_t seed = 7;
    int crop = 0;          // center crop of the truth image (0 = full frame)
    int border_crop = 8;   // pixels ignored by the metrics on every side
    NoiseParams noise;     // synthetic sensor noise (zero = clean protocol)
    MergeConfig merge;
    bool oracle_alignment = false;  // feed ground-truth offsets instead of aligning
};

std::vector<std::string> list_dataset(const std::string& dir);

// Reads a truth image, optionally center-crops, and trims to even dimensions.
RgbImage load_truth(const std::string& path, int crop);

// Per image: full-burst merge with oracle alignment ("oracle"), with
// estimated alignment ("auto"), and the single-frame baseline ("single").
BenchReport run_synthetic_bench(const std::string& dataset_dir, const std::string& dataset_name,
                                const BenchOptions& opts);

// Oracle fields corrupted before merging; rows are labeled tile_<p> and
// vnoise_<sigma>, plus a "clean" row per image.
BenchReport run_corruption_bench(const std::string& dataset_dir, const std::string& dataset_name,
                                 const BenchOptions& opts,
                                 const std::vector<double>& tile_fractions,
                                 const std::vector<double>& vector_sigmas);

// Merges every prefix length in frame_counts from one accumulation pass.
// Rows n<k> score against the truth; rows n<k>_vs_full against the
// longest-prefix merge result.
BenchReport run_frames_sweep(const std::string& dataset_dir, const std::string& dataset_name,
                             const BenchOptions& opts, const std::vector<int>& frame_counts);

// --- procedural data -------------------------------------------------------

// Deterministic natural-image-like test chart: smooth color gradients,
// soft-edged shapes of varied orientation, band-limited texture, thin lines.
RgbImage make_synthetic_truth(int width, int height, uint64_t seed);

// Writes count PNG truth images (size x size) into dir.
void write_proxy_dataset(const std::string& dir, int count, int size, uint64_t seed);

// --- scaling ---------------------------------------------------------------

struct ScalingPoint {
    double mpix = 0.0;
    double wall_per_frame_ms = 0.0;
    size_t peak_bytes = 0;
    int frames = 0;
};

// Merges synthetic bursts at the given square sizes / frame counts and
// records per-frame accumulation time and engine peak memory.
std::vector<ScalingPoint> run_scaling_harness(const std::vector<int>& sizes,
                                              const std::vector<int>& frame_counts, uint64_t seed,
                                              const MergeConfig& merge_cfg);

// Coefficient of determination of the least-squares line through the points.
double linear_fit_r2(const std::vector<std::pair<double, double>>& pts);

}  // namespace burstfuse
