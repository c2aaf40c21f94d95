#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "burstfuse/align.hpp"
#include "burstfuse/image.hpp"
#include "burstfuse/kernel_field.hpp"
#include "burstfuse/noise_model.hpp"
#include "burstfuse/raw.hpp"

namespace burstfuse {

struct MergeConfig {
    double zoom = 1.0;        // continuous upscaling factor in [1, 3]
    int base_index = 0;
    int frame_cap = 15;       // frames beyond the cap are ignored
    bool robustness = true;
    double loss_threshold = 0.5;
    int threads = 0;          // 0 = hardware concurrency
    int tile_size_override = 0;   // 0 = choose from SNR tuning
    double snr_override = -1.0;   // < 0 = estimate from the base frame
    AlignConfig align;
    McConfig mc;
    std::string cache_dir;    // noise-table cache; "" = default location

    bool finish = false;      // optional sharpen + contrast curve
    double finish_sigma = 3.0;
    double finish_amount = 1.0;
};

struct FrameDiagnostics {
    int frame_index = 0;
    double mean_mask = 1.0;
    double mean_abs_v = 0.0;
};

struct MergeDiagnostics {
    double snr = 0.0;
    TuningParams tuning;
    std::vector<FrameDiagnostics> frames;
    size_t peak_bytes = 0;     // engine-owned allocations, high-water mark
    double accumulate_ms = 0.0;
};

// Tracks bytes the merge engine owns: persistent state plus the transient
// per-frame working set. The high-water mark is what the scaling harness
// asserts is independent of burst length.
class MemoryMeter {
  public:
    void add_persistent(size_t bytes) {
        persistent_ += bytes;
        bump();
    }
    void begin_frame() { transient_ = 0; }
    void add_transient(size_t bytes) {
        transient_ += bytes;
        bump();
    }
    size_t peak() const { return peak_; }

  private:
    void bump() { peak_ = std::max(peak_, persistent_ + transient_); }
    size_t persistent_ = 0;
    size_t transient_ = 0;
    size_t peak_ = 0;
};

// Streaming kernel-regression fusion. Frames are fed one at a time (online,
// so memory does not grow with burst length); finalize() may be called after
// any prefix. Per-(pixel, channel) numerators and denominators accumulate in
// 64-bit fixed point, making the result bit-identical under any frame order
// and any thread count.
class MergeEngine {
  public:
    MergeEngine(const BayerFrame& base, const NoiseParams& noise, const MergeConfig& cfg);

    // field maps base pixels into this frame (full-res units). The base frame
    // itself must be fed exactly once with is_base = true (identity field).
    void accumulate(const BayerFrame& frame, const AlignmentField& field, bool is_base);

    RgbImage finalize() const;

    int out_width() const { return out_w_; }
    int out_height() const { return out_h_; }
    const MergeDiagnostics& diagnostics() const { return diag_; }
    const TuningParams& tuning() const { return tuning_; }
    const NoiseTables& tables() const { return tables_; }

    // Mean of the per-frame robustness masks fed so far (half-res, [0, 1]).
    ImageF mask_mean() const;

    // Fixed-point internals, exposed for invariant tests.
    static constexpr double kFixedScale = 17592186044416.0;  // 2^44
    static constexpr int64_t kDenEpsilon = 176;              // ~1e-8 * scale
    static constexpr double kSkipQuadform = 70.0;  // both terms round to 0 beyond this
    const std::vector<int64_t>& raw_accumulator() const { return acc_; }

  private:
    void accumulate_rows(const BayerFrame& frame, const AlignmentField& field,
                         const KernelField& kfield, const ImageF& mask, int y0, int y1);

    MergeConfig cfg_;
    NoiseParams noise_;
    int in_w_ = 0;
    int in_h_ = 0;
    int out_w_ = 0;
    int out_h_ = 0;
    double snr_ = 0.0;
    TuningParams tuning_;
    NoiseTables tables_;
    ImageF base_luma_;
    RgbImage base_guide_;
    RgbImage base_demosaic_;  // fallback for starved pixels
    // Interleaved [num_r, den_r, num_g, den_g, num_b, den_b] per pixel.
    std::vector<int64_t> acc_;
    ImageF mask_sum_;
    int frames_in_ = 0;
    bool base_seen_ = false;
    MemoryMeter meter_;
    MergeDiagnostics diag_;
};

// One-call convenience: aligns (or takes precomputed fields), respects the
// frame cap, merges, applies optional finishing.
RgbImage merge_burst(const Burst& burst, const MergeConfig& cfg,
                     MergeDiagnostics* diag_out = nullptr,
                     const std::vector<AlignmentField>* fields_in = nullptr,
                     ImageF* mask_mean_out = nullptr);

// Finishing pass: unsharp mask on each channel followed by a smoothstep
// contrast curve, everything clamped to [0, 1].
RgbImage finish_image(const RgbImage& img, double sigma, double amount);

void write_merge_diagnostics_csv(const std::string& path, const MergeDiagnostics& diag);

}  // namespace burstfuse
