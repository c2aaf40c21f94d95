#pragma once

#include "burstfuse/align.hpp"
#include "burstfuse/image.hpp"
#include "burstfuse/noise_model.hpp"

namespace burstfuse {

// Half-resolution comparison statistics between the base guide and an
// aligned frame guide (nearest-neighbor gather through the tile field).
struct LocalStats {
    ImageF d_ms;        // max-channel |3x3 local mean difference|
    ImageF sigma_ms;    // max-channel 3x3 local std of the base guide
    ImageF brightness;  // base guide channel-mean brightness, for table lookup

    size_t byte_size() const {
        return d_ms.byte_size() + sigma_ms.byte_size() + brightness.byte_size();
    }
};

LocalStats local_statistics(const RgbImage& base_guide, const RgbImage& frame_guide,
                            const AlignmentField& field);

// Noise-aware corrections:
//   sigma = max(sigma_ms, sigma_md(brightness))       (noise floor)
//   d     = d_ms * d_ms^2 / (d_ms^2 + d_md(brightness)^2)   (shrinks noise-scale
//           differences, keeps large ones nearly intact)
void noise_corrected_stats(const LocalStats& stats, const NoiseTables& tables, ImageF* sigma_out,
                           ImageF* d_out);

// Per-tile motion context: extent is the magnitude of the componentwise
// displacement range over the 3x3 tile neighborhood; scale is s1 where the
// extent exceeds m_th and s2 elsewhere.
struct MotionPrior {
    int tiles_x = 0;
    int tiles_y = 0;
    int tile_size = 16;  // full-res px
    float m_th = 0.8f;   // extent threshold the prior was built with
    std::vector<float> extent;
    std::vector<float> scale;

    float extent_at_tile(int tx, int ty) const {
        return extent[static_cast<size_t>(ty) * tiles_x + tx];
    }
    // Lookup for a half-res pixel.
    int tile_index_half(int hx, int hy) const;
};

MotionPrior motion_prior_scale(const AlignmentField& field, const TuningParams& tune);

// R = clamp(scale * exp(-d^2 / sigma^2) - t, 0, 1), eroded by a 5x5 minimum.
ImageF robustness_map(const ImageF& sigma, const ImageF& d, const MotionPrior& prior,
                      const TuningParams& tune);

// High-frequency protection: where the tile motion extent exceeds m_th and a
// 3x3 lowpass would destroy most of the local variance (ratio below
// loss_threshold), the content cannot be merged reliably - force mask 0.
void hf_variance_reject(const ImageF& base_luma, const MotionPrior& prior, double loss_threshold,
                        ImageF& mask);

}  // namespace burstfuse
