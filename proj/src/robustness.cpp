#include "burstfuse/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "burstfuse/errors.hpp"
#include "burstfuse/filters.hpp"

namespace burstfuse {
namespace {

// 3x3 sample std (n-1 denominator) from local sum and sum of squares.
inline float local_std(float sum, float sum_sq) {
    const float mean = sum / 9.0f;
    const float ss = std::max(0.0f, sum_sq - 9.0f * mean * mean);
    return std::sqrt(ss / 8.0f);
}

}  // namespace

LocalStats local_statistics(const RgbImage& base_guide, const RgbImage& frame_guide,
                            const AlignmentField& field) {
    if (!base_guide.same_shape(frame_guide)) {
        throw InvariantError("guide images disagree on dimensions");
    }
    const int w = base_guide.width();
    const int h = base_guide.height();

    LocalStats stats;
    stats.d_ms.reset(w, h);
    stats.sigma_ms.reset(w, h);
    stats.brightness.reset(w, h);

    for (int c = 0; c < 3; ++c) {
        const ImageF& bp = base_guide.plane(c);
        const ImageF& fp = frame_guide.plane(c);

        const ImageF base_sum = box3_sum(bp);
        const ImageF frame_sum = box3_sum(fp);
        ImageF base_sq(w, h);
        for (int y = 0; y < h; ++y) {
            const float* src = bp.row(y);
            float* dst = base_sq.row(y);
            for (int x = 0; x < w; ++x) dst[x] = src[x] * src[x];
        }
        const ImageF base_sum_sq = box3_sum(base_sq);

        for (int y = 0; y < h; ++y) {
            float* d_row = stats.d_ms.row(y);
            float* s_row = stats.sigma_ms.row(y);
            float* b_row = stats.brightness.row(y);
            const float* bsum = base_sum.row(y);
            const float* bsq = base_sum_sq.row(y);
            for (int x = 0; x < w; ++x) {
                // Gather the aligned position on the half-res grid.
                const Vec2f v = field.at_pixel(2.0f * x, 2.0f * y);
                const int qx = std::clamp(round_to_int(x + 0.5f * v.x), 0, w - 1);
                const int qy = std::clamp(round_to_int(y + 0.5f * v.y), 0, h - 1);

                const float base_mean = bsum[x] / 9.0f;
                const float frame_mean = frame_sum.at(qx, qy) / 9.0f;
                d_row[x] = std::max(d_row[x], std::abs(frame_mean - base_mean));
                s_row[x] = std::max(s_row[x], local_std(bsum[x], bsq[x]));
                b_row[x] += base_mean / 3.0f;
            }
        }
    }
    return stats;
}

void noise_corrected_stats(const LocalStats& stats, const NoiseTables& tables, ImageF* sigma_out,
                           ImageF* d_out) {
    const int w = stats.d_ms.width();
    const int h = stats.d_ms.height();
    sigma_out->reset(w, h);
    d_out->reset(w, h);
    for (int y = 0; y < h; ++y) {
        const float* d_ms = stats.d_ms.row(y);
        const float* s_ms = stats.sigma_ms.row(y);
        const float* bright = stats.brightness.row(y);
        float* sig = sigma_out->row(y);
        float* d = d_out->row(y);
        for (int x = 0; x < w; ++x) {
            const double sigma_md = tables.lookup_sigma(bright[x]);
            const double d_md = tables.lookup_d(bright[x]);
            sig[x] = static_cast<float>(std::max(static_cast<double>(s_ms[x]), sigma_md));
            const double dm = d_ms[x];
            const double den = dm * dm + d_md * d_md;
            d[x] = den <= 0.0 ? 0.0f : static_cast<float>(dm * (dm * dm) / den);
        }
    }
}

int MotionPrior::tile_index_half(int hx, int hy) const {
    const int tx = std::clamp(2 * hx / tile_size, 0, tiles_x - 1);
    const int ty = std::clamp(2 * hy / tile_size, 0, tiles_y - 1);
    return ty * tiles_x + tx;
}

MotionPrior motion_prior_scale(const AlignmentField& field, const TuningParams& tune) {
    MotionPrior prior;
    prior.tiles_x = field.tiles_x;
    prior.tiles_y = field.tiles_y;
    prior.tile_size = field.tile_size;
    prior.m_th = static_cast<float>(tune.m_th);
    prior.extent.resize(field.vec.size());
    prior.scale.resize(field.vec.size());

    for (int ty = 0; ty < field.tiles_y; ++ty) {
        for (int tx = 0; tx < field.tiles_x; ++tx) {
            float min_x = std::numeric_limits<float>::max();
            float max_x = std::numeric_limits<float>::lowest();
            float min_y = min_x;
            float max_y = max_x;
            for (int ny = std::max(0, ty - 1); ny <= std::min(field.tiles_y - 1, ty + 1); ++ny) {
                for (int nx = std::max(0, tx - 1); nx <= std::min(field.tiles_x - 1, tx + 1);
                     ++nx) {
                    const Vec2f v = field.tile(nx, ny);
                    min_x = std::min(min_x, v.x);
                    max_x = std::max(max_x, v.x);
                    min_y = std::min(min_y, v.y);
                    max_y = std::max(max_y, v.y);
                }
            }
            const float ex = max_x - min_x;
            const float ey = max_y - min_y;
            const float extent = std::sqrt(ex * ex + ey * ey);
            const size_t i = static_cast<size_t>(ty) * field.tiles_x + tx;
            prior.extent[i] = extent;
            // Compare in float: promoting extent to double would nudge values
            // that equal the threshold across it (0.8f > 0.8 is true in double).
            prior.scale[i] = extent > prior.m_th ? static_cast<float>(tune.s1)
                                                 : static_cast<float>(tune.s2);
        }
    }
    return prior;
}

ImageF robustness_map(const ImageF& sigma, const ImageF& d, const MotionPrior& prior,
                      const TuningParams& tune) {
    const int w = sigma.width();
    const int h = sigma.height();
    ImageF r(w, h);
    for (int y = 0; y < h; ++y) {
        const float* sig = sigma.row(y);
        const float* dd = d.row(y);
        float* out = r.row(y);
        for (int x = 0; x < w; ++x) {
            const float s = prior.scale[prior.tile_index_half(x, y)];
            double term;
            if (sig[x] <= 1e-12f) {
                // No noise and no texture: any difference is real motion.
                term = dd[x] <= 0.0f ? 1.0 : 0.0;
            } else {
                const double ratio = static_cast<double>(dd[x]) / sig[x];
                term = std::exp(-ratio * ratio);
            }
            out[x] = static_cast<float>(std::clamp(s * term - tune.t, 0.0, 1.0));
        }
    }
    return min5_filter(r);
}

void hf_variance_reject(const ImageF& base_luma, const MotionPrior& prior, double loss_threshold,
                        ImageF& mask) {
    const int w = base_luma.width();
    const int h = base_luma.height();
    if (mask.width() != w || mask.height() != h) {
        throw InvariantError("mask dimensions disagree with luma");
    }

    ImageF sq(w, h);
    for (int y = 0; y < h; ++y) {
        const float* src = base_luma.row(y);
        float* dst = sq.row(y);
        for (int x = 0; x < w; ++x) dst[x] = src[x] * src[x];
    }
    const ImageF sum = box3_sum(base_luma);
    const ImageF sum_sq = box3_sum(sq);

    ImageF low(w, h);
    for (int y = 0; y < h; ++y) {
        const float* s = sum.row(y);
        float* dst = low.row(y);
        for (int x = 0; x < w; ++x) dst[x] = s[x] / 9.0f;
    }
    ImageF low_sq(w, h);
    for (int y = 0; y < h; ++y) {
        const float* src = low.row(y);
        float* dst = low_sq.row(y);
        for (int x = 0; x < w; ++x) dst[x] = src[x] * src[x];
    }
    const ImageF low_sum = box3_sum(low);
    const ImageF low_sum_sq = box3_sum(low_sq);

    for (int y = 0; y < h; ++y) {
        float* m = mask.row(y);
        for (int x = 0; x < w; ++x) {
            if (prior.extent[prior.tile_index_half(x, y)] <= prior.m_th) continue;
            const float before_mean = sum.at(x, y) / 9.0f;
            const float before_var =
                std::max(0.0f, sum_sq.at(x, y) / 9.0f - before_mean * before_mean);
            if (before_var <= 1e-12f) continue;
            const float after_mean = low_sum.at(x, y) / 9.0f;
            const float after_var =
                std::max(0.0f, low_sum_sq.at(x, y) / 9.0f - after_mean * after_mean);
            if (after_var / before_var < static_cast<float>(loss_threshold)) m[x] = 0.0f;
        }
    }
}

}  // namespace burstfuse
