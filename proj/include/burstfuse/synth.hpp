#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "burstfuse/align.hpp"
#include "burstfuse/image.hpp"
#include "burstfuse/raw.hpp"

namespace burstfuse {

// Random camera-shake translations: frame 0 gets (0, 0), the rest draw
// each axis from N(0, sigma^2).
std::vector<Vec2f> generate_burst_offsets(int frames, double sigma, uint64_t seed);

// Nearest-neighbor resample: out(q) = src(q - round(offset)), border-clamped.
RgbImage shift_rgb_nn(const RgbImage& src, Vec2f offset);

// Mosaics a shifted copy of the truth per offset; optional per-pixel Gaussian
// sensor noise (variance slope * signal + intercept) clamped to [0, 1].
Burst synthesize_burst(const RgbImage& truth, const std::vector<Vec2f>& offsets,
                       const NoiseParams& noise, uint64_t seed);

// Ground-truth alignment: every tile of frame k carries offsets[k].
std::vector<AlignmentField> oracle_fields(const std::vector<Vec2f>& offsets, int width, int height,
                                          int tile_size);

// Replaces exactly round(fraction * tile_count) distinct tiles with vectors
// copied from uniformly drawn other tiles of the uncorrupted field.
AlignmentField corrupt_tile_replace(const AlignmentField& field, double fraction, uint64_t seed);

// Adds i.i.d. N(0, sigma^2) to both components of every tile vector.
AlignmentField corrupt_vector_noise(const AlignmentField& field, double sigma, uint64_t seed);

void write_offsets_csv(const std::string& path, const std::vector<Vec2f>& offsets);
std::vector<Vec2f> read_offsets_csv(const std::string& path);

}  // namespace burstfuse
