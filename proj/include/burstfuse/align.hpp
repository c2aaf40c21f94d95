#pragma once

#include <string>
#include <vector>

#include "burstfuse/image.hpp"
#include "burstfuse/raw.hpp"

namespace burstfuse {

// Per-tile translation field. Vectors map base-frame pixel positions into the
// source frame: content at base pixel p is found near p + v in that frame.
// Vectors and tile_size are in full-resolution mosaic pixels.
struct AlignmentField {
    int tiles_x = 0;
    int tiles_y = 0;
    int tile_size = 16;
    std::vector<Vec2f> vec;

    static AlignmentField zeros(int width, int height, int tile_size);

    Vec2f& tile(int tx, int ty) { return vec[static_cast<size_t>(ty) * tiles_x + tx]; }
    Vec2f tile(int tx, int ty) const { return vec[static_cast<size_t>(ty) * tiles_x + tx]; }

    // Clamped piecewise-constant lookup at full-res base coordinates.
    Vec2f at_pixel(float x, float y) const;

    size_t byte_size() const { return vec.size() * sizeof(Vec2f); }
};

struct AlignConfig {
    int tile_size = 16;      // full-res px; the luma stages use tile_size / 2
    int levels = 0;          // pyramid depth, 0 = auto (<= 4, top short side >= 32)
    int search_radius = 4;   // integer search radius per pyramid level
    int lk_iters = 3;        // least-squares subpixel iterations
    float lk_clamp = 2.0f;   // max update magnitude per iteration, luma px
};

// Coarse-to-fine box pyramid; level 0 is the input. Throws InvariantError if
// the requested depth would shrink the short side below 32 px.
std::vector<ImageF> build_pyramid(const ImageF& luma, int levels);

// Integer-precision tile matching between two luma images. The returned
// field is in luma pixel units with luma-sized tiles.
AlignmentField block_match_luma(const ImageF& base_luma, const ImageF& frame_luma,
                                const AlignConfig& cfg);

// Iterative least-squares subpixel refinement of a matched field (in place
// semantics via return). Flat tiles and singular systems leave vectors
// untouched.
AlignmentField lk_refine_luma(const ImageF& base_luma, const ImageF& frame_luma,
                              AlignmentField field, const AlignConfig& cfg);

// Full per-frame alignment at mosaic scale: decimated-luma matching plus
// refinement, vectors scaled back to full-res pixels.
AlignmentField align_frame(const ImageF& base_luma, const ImageF& frame_luma,
                           const AlignConfig& cfg);

// Aligns every frame against frames[base_index]; the base gets a zero field.
std::vector<AlignmentField> align_burst(const Burst& burst, int base_index,
                                        const AlignConfig& cfg);

// 2D histogram of fractional displacement parts in [0, 1) x [0, 1).
struct OffsetHistogram {
    int bins = 0;
    long total = 0;
    std::vector<long> count;

    long at(int bx, int by) const { return count[static_cast<size_t>(by) * bins + bx]; }
    std::vector<long> marginal_x() const;
    std::vector<long> marginal_y() const;
};

OffsetHistogram subpixel_offset_histogram(const std::vector<AlignmentField>& fields, int bins);

// Pearson statistic of counts against the uniform distribution.
double chi_square_uniform(const std::vector<long>& counts);

void write_alignment_csv(const std::string& path, const std::vector<AlignmentField>& fields);
std::vector<AlignmentField> read_alignment_csv(const std::string& path, int width, int height,
                                               int tile_size);

void write_histogram_csv(const std::string& path, const OffsetHistogram& hist);

}  // namespace burstfuse
