#pragma once

#include <string>
#include <vector>

#include "burstfuse/image.hpp"

namespace burstfuse {

// Sensor noise model in normalized [0, 1] units:
//   variance(signal) = slope * signal + intercept
struct NoiseParams {
    double slope = 0.0;
    double intercept = 0.0;
};

// One RGGB mosaic frame, black-level subtracted and scaled to [0, 1].
// Site layout: (even x, even y) = R, (odd, even) = G1, (even, odd) = G2,
// (odd, odd) = B. Dimensions are always even.
struct BayerFrame {
    ImageF data;

    int width() const { return data.width(); }
    int height() const { return data.height(); }
};

enum class CfaChannel { red, green, blue };

inline CfaChannel cfa_channel(int x, int y) {
    const bool odd_x = (x & 1) != 0;
    const bool odd_y = (y & 1) != 0;
    if (!odd_y) return odd_x ? CfaChannel::green : CfaChannel::red;
    return odd_x ? CfaChannel::blue : CfaChannel::green;
}

struct Burst {
    std::vector<BayerFrame> frames;
    NoiseParams noise;

    int size() const { return static_cast<int>(frames.size()); }
    int width() const { return frames.empty() ? 0 : frames.front().width(); }
    int height() const { return frames.empty() ? 0 : frames.front().height(); }
};

// Throws InvariantError unless all frames share one even-sized shape.
void validate_burst(const Burst& burst);

// Reads a 16-bit PGM or PNG mosaic plus its plain-text sidecar
// (pattern=RGGB, black=, white=, noise_slope=, noise_intercept=) and
// normalizes to [0, 1]. Missing sidecar fields, unsupported bit depths and
// odd dimensions are all reported distinctly.
BayerFrame load_bayer_frame(const std::string& image_path, const std::string& sidecar_path,
                            NoiseParams* noise_out = nullptr);

void write_bayer_frame(const std::string& image_path, const std::string& sidecar_path,
                       const BayerFrame& frame, const NoiseParams& noise);

// Loads frame_000.(pgm|png) .. frame_NNN from a burst directory; the sidecar
// is either per-frame (frame_000.txt) or shared (burst.txt).
Burst load_burst_dir(const std::string& dir, int max_frames);

// Half-resolution luma: plain mean of each 2x2 quad.
ImageF decimate_luma(const BayerFrame& frame);

// Full-resolution luma proxy: each pixel is the mean of the 2x2 mosaic quad
// anchored at it (one red, two green and one blue sample at every parity), so
// whole-pixel motion of the mosaic moves this luma rigidly.  Burst alignment
// matches on it because a half-resolution luma cannot represent odd
// displacements: the quads regroup and textured content stops matching.
ImageF dense_luma(const BayerFrame& frame);

// Half-resolution RGB guide: per quad r = R, g = (G1 + G2) / 2, b = B.
RgbImage compute_guide(const BayerFrame& frame);

// Single-frame bilinear demosaic (border-clamped); the merge fallback and
// the single-frame baseline.
RgbImage demosaic_bilinear(const BayerFrame& frame);

// Samples an RGB image through the RGGB mosaic (used when synthesizing).
BayerFrame mosaic_from_rgb(const RgbImage& rgb);

}  // namespace burstfuse
