#include "burstfuse/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "burstfuse/errors.hpp"
#include "burstfuse/filters.hpp"
#include "burstfuse/simd/kernels.hpp"

namespace burstfuse {
namespace {

constexpr int kMinTopSide = 32;
constexpr int kMaxAutoLevels = 4;

int luma_tile_size(const AlignConfig& cfg) { return std::max(4, cfg.tile_size / 2); }

int tiles_for(int extent, int tile) { return (extent + tile - 1) / tile; }

int auto_levels(int w, int h) {
    int levels = 1;
    while (levels < kMaxAutoLevels && std::min(w, h) / 2 >= kMinTopSide) {
        w /= 2;
        h /= 2;
        ++levels;
    }
    return levels;
}

// SSD between the base tile [x0,x1)x[y0,y1) and the frame patch displaced by
// (vx, vy), with frame coordinates clamped at the borders.
double tile_ssd(const ImageF& base, const ImageF& frame, int x0, int y0, int x1, int y1, int vx,
                int vy) {
    const auto& k = simd::active_kernels();
    const int w = frame.width();
    const int h = frame.height();
    double cost = 0.0;
    for (int y = y0; y < y1; ++y) {
        const float* brow = base.row(y) + x0;
        const int fy = std::clamp(y + vy, 0, h - 1);
        const float* frow = frame.row(fy);
        if (x0 + vx >= 0 && x1 + vx <= w) {
            cost += k.sum_sq_diff(brow, frow + x0 + vx, static_cast<size_t>(x1 - x0));
        } else {
            for (int x = x0; x < x1; ++x) {
                const double d = static_cast<double>(base.at(x, y)) -
                                 static_cast<double>(frow[std::clamp(x + vx, 0, w - 1)]);
                cost += d * d;
            }
        }
    }
    return cost;
}

struct LumaField {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<Vec2f> vec;
};

}  // namespace

AlignmentField AlignmentField::zeros(int width, int height, int tile_size) {
    AlignmentField f;
    f.tile_size = tile_size;
    f.tiles_x = tiles_for(width, tile_size);
    f.tiles_y = tiles_for(height, tile_size);
    f.vec.assign(static_cast<size_t>(f.tiles_x) * f.tiles_y, Vec2f{});
    return f;
}

Vec2f AlignmentField::at_pixel(float x, float y) const {
    const int tx = std::clamp(static_cast<int>(std::floor(x / tile_size)), 0, tiles_x - 1);
    const int ty = std::clamp(static_cast<int>(std::floor(y / tile_size)), 0, tiles_y - 1);
    return tile(tx, ty);
}

std::vector<ImageF> build_pyramid(const ImageF& luma, int levels) {
    if (levels < 1) throw InvariantError("pyramid depth must be at least 1");
    std::vector<ImageF> pyr;
    pyr.reserve(levels);
    pyr.push_back(luma);
    for (int l = 1; l < levels; ++l) {
        const ImageF& prev = pyr.back();
        const int w = prev.width() / 2;
        const int h = prev.height() / 2;
        if (std::min(w, h) < kMinTopSide) {
            throw InvariantError("too many pyramid levels for the image size (level " +
                                 std::to_string(l) + " would be " + std::to_string(w) + "x" +
                                 std::to_string(h) + ")");
        }
        ImageF next(w, h);
        simd::active_kernels().box_down2(prev.data(), prev.width(), prev.height(), next.data());
        pyr.push_back(std::move(next));
    }
    return pyr;
}

namespace {

AlignmentField block_match_tiles(const ImageF& base_luma, const ImageF& frame_luma,
                                 const AlignConfig& cfg, int tl) {
    if (!base_luma.same_shape(frame_luma)) {
        throw InvariantError("alignment inputs disagree on dimensions");
    }
    const int levels = cfg.levels > 0 ? cfg.levels : auto_levels(base_luma.width(), base_luma.height());
    const std::vector<ImageF> pyr_base = build_pyramid(base_luma, levels);
    const std::vector<ImageF> pyr_frame = build_pyramid(frame_luma, levels);

    LumaField parent;
    for (int level = levels - 1; level >= 0; --level) {
        const ImageF& b = pyr_base[level];
        const ImageF& f = pyr_frame[level];
        LumaField cur;
        cur.tiles_x = tiles_for(b.width(), tl);
        cur.tiles_y = tiles_for(b.height(), tl);
        cur.vec.resize(static_cast<size_t>(cur.tiles_x) * cur.tiles_y);

        for (int ty = 0; ty < cur.tiles_y; ++ty) {
            for (int tx = 0; tx < cur.tiles_x; ++tx) {
                const int x0 = tx * tl;
                const int y0 = ty * tl;
                const int x1 = std::min(x0 + tl, b.width());
                const int y1 = std::min(y0 + tl, b.height());

                int init_x = 0;
                int init_y = 0;
                if (!parent.vec.empty()) {
                    // Seed from the parent tile covering this tile's center.
                    const float cx = (static_cast<float>(x0 + x1) * 0.5f) / 2.0f;
                    const float cy = (static_cast<float>(y0 + y1) * 0.5f) / 2.0f;
                    const int px = std::clamp(static_cast<int>(cx) / tl, 0, parent.tiles_x - 1);
                    const int py = std::clamp(static_cast<int>(cy) / tl, 0, parent.tiles_y - 1);
                    const Vec2f pv = parent.vec[static_cast<size_t>(py) * parent.tiles_x + px];
                    init_x = 2 * static_cast<int>(pv.x);
                    init_y = 2 * static_cast<int>(pv.y);
                }

                // Start from the seed's own cost so featureless tiles (all
                // displacements tie) keep the seed instead of drifting to
                // the first scanned corner.
                double best = tile_ssd(b, f, x0, y0, x1, y1, init_x, init_y);
                int best_x = init_x;
                int best_y = init_y;
                for (int dy = -cfg.search_radius; dy <= cfg.search_radius; ++dy) {
                    for (int dx = -cfg.search_radius; dx <= cfg.search_radius; ++dx) {
                        const int vx = init_x + dx;
                        const int vy = init_y + dy;
                        if (vx == init_x && vy == init_y) continue;
                        const double cost = tile_ssd(b, f, x0, y0, x1, y1, vx, vy);
                        if (cost < best) {
                            best = cost;
                            best_x = vx;
                            best_y = vy;
                        }
                    }
                }
                cur.vec[static_cast<size_t>(ty) * cur.tiles_x + tx] =
                    Vec2f(static_cast<float>(best_x), static_cast<float>(best_y));
            }
        }
        parent = std::move(cur);
    }

    AlignmentField out;
    out.tile_size = tl;  // luma px; align_frame rescales
    out.tiles_x = parent.tiles_x;
    out.tiles_y = parent.tiles_y;
    out.vec = std::move(parent.vec);
    return out;
}

}  // namespace

AlignmentField block_match_luma(const ImageF& base_luma, const ImageF& frame_luma,
                                const AlignConfig& cfg) {
    return block_match_tiles(base_luma, frame_luma, cfg, luma_tile_size(cfg));
}

AlignmentField lk_refine_luma(const ImageF& base_luma, const ImageF& frame_luma,
                              AlignmentField field, const AlignConfig& cfg) {
    const int tl = field.tile_size;
    const int w = base_luma.width();
    const int h = base_luma.height();

    // The least-squares window extends a full tile beyond the tile itself:
    // small tiles alone condition the normal matrix poorly on smooth content,
    // which amplifies interpolation bias along the weak eigen direction.
    const int pad = tl;

    for (int ty = 0; ty < field.tiles_y; ++ty) {
        for (int tx = 0; tx < field.tiles_x; ++tx) {
            Vec2f v = field.tile(tx, ty);
            const int x0 = std::max(0, tx * tl - pad);
            const int y0 = std::max(0, ty * tl - pad);
            const int x1 = std::min(tx * tl + tl + pad, w);
            const int y1 = std::min(ty * tl + tl + pad, h);

            for (int iter = 0; iter < cfg.lk_iters; ++iter) {
                double gxx = 0.0, gxy = 0.0, gyy = 0.0, bx = 0.0, by = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        const float sx = static_cast<float>(x) + v.x;
                        const float sy = static_cast<float>(y) + v.y;
                        // Samples landing outside the frame interior carry
                        // border-clamp duplicates, not observations.
                        if (sx < 1.0f || sy < 1.0f || sx > static_cast<float>(w) - 2.0f ||
                            sy > static_cast<float>(h) - 2.0f) {
                            continue;
                        }
                        // Symmetric gradient (mean of base and warped-frame
                        // gradients): cancels the first-order interpolation
                        // bias a one-sided linearization leaves behind.
                        const double gxb = 0.5 * (base_luma.at_clamped(x + 1, y) -
                                                  base_luma.at_clamped(x - 1, y));
                        const double gyb = 0.5 * (base_luma.at_clamped(x, y + 1) -
                                                  base_luma.at_clamped(x, y - 1));
                        const double gxf = 0.5 * (sample_bilinear(frame_luma, sx + 1.0f, sy) -
                                                  sample_bilinear(frame_luma, sx - 1.0f, sy));
                        const double gyf = 0.5 * (sample_bilinear(frame_luma, sx, sy + 1.0f) -
                                                  sample_bilinear(frame_luma, sx, sy - 1.0f));
                        const double gx = 0.5 * (gxb + gxf);
                        const double gy = 0.5 * (gyb + gyf);
                        const double r = sample_bilinear(frame_luma, sx, sy) - base_luma.at(x, y);
                        gxx += gx * gx;
                        gxy += gx * gy;
                        gyy += gy * gy;
                        bx += gx * r;
                        by += gy * r;
                    }
                }
                const double det = gxx * gyy - gxy * gxy;
                const double scale = std::max(1e-12, gxx + gyy);
                if (det <= 1e-12 * scale * scale) break;  // flat or degenerate tile
                double dx = -(gyy * bx - gxy * by) / det;
                double dy = -(gxx * by - gxy * bx) / det;
                dx = std::clamp(dx, -static_cast<double>(cfg.lk_clamp),
                                static_cast<double>(cfg.lk_clamp));
                dy = std::clamp(dy, -static_cast<double>(cfg.lk_clamp),
                                static_cast<double>(cfg.lk_clamp));
                v.x += static_cast<float>(dx);
                v.y += static_cast<float>(dy);
                if (std::sqrt(dx * dx + dy * dy) < 1e-3) break;
            }
            field.tile(tx, ty) = v;
        }
    }
    return field;
}

AlignmentField align_frame(const ImageF& base_luma, const ImageF& frame_luma,
                           const AlignConfig& cfg) {
    // Integer matching runs on low-passed luma: near-Nyquist texture (fences,
    // fine fabric) makes the raw cost surface periodic, and a whole-pixel
    // search can lock one texture period off.  Suppressing the ripple lets
    // edges and patch envelopes pick the right basin; the refinement below
    // then uses the unfiltered luma for precision.
    const ImageF base_lp = gaussian_blur(base_luma, 1.0);
    const ImageF frame_lp = gaussian_blur(frame_luma, 1.0);
    AlignmentField luma_field = block_match_luma(base_lp, frame_lp, cfg);
    luma_field = lk_refine_luma(base_luma, frame_luma, std::move(luma_field), cfg);
    AlignmentField out;
    out.tile_size = cfg.tile_size;
    out.tiles_x = luma_field.tiles_x;
    out.tiles_y = luma_field.tiles_y;
    out.vec.resize(luma_field.vec.size());
    for (size_t i = 0; i < out.vec.size(); ++i) {
        out.vec[i] = luma_field.vec[i] * 2.0f;  // luma px -> mosaic px
    }
    return out;
}

std::vector<AlignmentField> align_burst(const Burst& burst, int base_index,
                                        const AlignConfig& cfg) {
    validate_burst(burst);
    if (base_index < 0 || base_index >= burst.size()) {
        throw InvariantError("base frame index " + std::to_string(base_index) +
                             " out of range for burst of " + std::to_string(burst.size()));
    }
    // Bursts are matched on the full-resolution quad-mean luma rather than
    // the decimated one: decimation makes odd whole-pixel displacements
    // unrepresentable (the 2x2 quads regroup), which on fine texture turns
    // the cost surface into noise and locks tiles a texture period off.
    // Tiles and vectors come out directly in full-res pixels.
    const ImageF base_luma = dense_luma(burst.frames[base_index]);
    const ImageF base_lp = gaussian_blur(base_luma, 1.0);
    std::vector<AlignmentField> fields(burst.frames.size());
    for (int k = 0; k < burst.size(); ++k) {
        if (k == base_index) {
            fields[k] = AlignmentField::zeros(burst.width(), burst.height(), cfg.tile_size);
            continue;
        }
        const ImageF frame_luma = dense_luma(burst.frames[k]);
        const ImageF frame_lp = gaussian_blur(frame_luma, 1.0);
        AlignmentField f = block_match_tiles(base_lp, frame_lp, cfg, cfg.tile_size);
        fields[k] = lk_refine_luma(base_luma, frame_luma, std::move(f), cfg);
    }
    return fields;
}

std::vector<long> OffsetHistogram::marginal_x() const {
    std::vector<long> m(bins, 0);
    for (int by = 0; by < bins; ++by) {
        for (int bx = 0; bx < bins; ++bx) m[bx] += at(bx, by);
    }
    return m;
}

std::vector<long> OffsetHistogram::marginal_y() const {
    std::vector<long> m(bins, 0);
    for (int by = 0; by < bins; ++by) {
        for (int bx = 0; bx < bins; ++bx) m[by] += at(bx, by);
    }
    return m;
}

OffsetHistogram subpixel_offset_histogram(const std::vector<AlignmentField>& fields, int bins) {
    if (bins < 1) throw InvariantError("histogram needs at least one bin");
    OffsetHistogram hist;
    hist.bins = bins;
    hist.count.assign(static_cast<size_t>(bins) * bins, 0);
    for (const AlignmentField& f : fields) {
        for (const Vec2f& v : f.vec) {
            const double fx = v.x - std::floor(v.x);
            const double fy = v.y - std::floor(v.y);
            const int bx = std::min(static_cast<int>(fx * bins), bins - 1);
            const int by = std::min(static_cast<int>(fy * bins), bins - 1);
            ++hist.count[static_cast<size_t>(by) * bins + bx];
            ++hist.total;
        }
    }
    return hist;
}

double chi_square_uniform(const std::vector<long>& counts) {
    long total = 0;
    for (long c : counts) total += c;
    if (total == 0 || counts.empty()) return 0.0;
    const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
    double stat = 0.0;
    for (long c : counts) {
        const double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    return stat;
}

void write_alignment_csv(const std::string& path, const std::vector<AlignmentField>& fields) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "frame,tile_x,tile_y,v_x,v_y\n";
    for (size_t k = 0; k < fields.size(); ++k) {
        const AlignmentField& fld = fields[k];
        for (int ty = 0; ty < fld.tiles_y; ++ty) {
            for (int tx = 0; tx < fld.tiles_x; ++tx) {
                const Vec2f v = fld.tile(tx, ty);
                f << k << "," << tx << "," << ty << "," << v.x << "," << v.y << "\n";
            }
        }
    }
    if (!f) throw IoError("failed writing '" + path + "'");
}

std::vector<AlignmentField> read_alignment_csv(const std::string& path, int width, int height,
                                               int tile_size) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open alignment csv '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty alignment csv '" + path + "'");

    std::vector<AlignmentField> fields;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        long values_frame = 0;
        int tx = 0, ty = 0;
        float vx = 0.0f, vy = 0.0f;
        try {
            std::getline(ss, cell, ',');
            values_frame = std::stol(cell);
            std::getline(ss, cell, ',');
            tx = std::stoi(cell);
            std::getline(ss, cell, ',');
            ty = std::stoi(cell);
            std::getline(ss, cell, ',');
            vx = std::stof(cell);
            if (!std::getline(ss, cell, ',')) throw std::invalid_argument(line);
            vy = std::stof(cell);
        } catch (const std::exception&) {
            throw IoError("malformed alignment csv row '" + line + "' in '" + path + "'");
        }
        while (static_cast<long>(fields.size()) <= values_frame) {
            fields.push_back(AlignmentField::zeros(width, height, tile_size));
        }
        AlignmentField& fld = fields[values_frame];
        if (tx < 0 || tx >= fld.tiles_x || ty < 0 || ty >= fld.tiles_y) {
            throw IoError("alignment csv tile (" + std::to_string(tx) + "," + std::to_string(ty) +
                          ") out of range for " + std::to_string(width) + "x" +
                          std::to_string(height) + " tiles of " + std::to_string(tile_size));
        }
        fld.tile(tx, ty) = Vec2f(vx, vy);
    }
    if (fields.empty()) throw IoError("alignment csv '" + path + "' has no rows");
    return fields;
}

void write_histogram_csv(const std::string& path, const OffsetHistogram& hist) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "bin_x,bin_y,frequency\n";
    for (int by = 0; by < hist.bins; ++by) {
        for (int bx = 0; bx < hist.bins; ++bx) {
            const double freq =
                hist.total > 0 ? static_cast<double>(hist.at(bx, by)) / hist.total : 0.0;
            f << bx << "," << by << "," << freq << "\n";
        }
    }
    if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace burstfuse
