#include "burstfuse/merge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "burstfuse/errors.hpp"
#include "burstfuse/filters.hpp"
#include "burstfuse/parallel.hpp"
#include "burstfuse/robustness.hpp"
#include "burstfuse/simd/kernels.hpp"

namespace burstfuse {
namespace {

int even_floor(double v) {
    int n = static_cast<int>(std::floor(v));
    if (n % 2 != 0) --n;
    return n;
}

double image_mean(const ImageF& img) {
    double sum = 0.0;
    for (int y = 0; y < img.height(); ++y) {
        const float* row = img.row(y);
        for (int x = 0; x < img.width(); ++x) sum += row[x];
    }
    return img.size() == 0 ? 0.0 : sum / static_cast<double>(img.size());
}

}  // namespace

MergeEngine::MergeEngine(const BayerFrame& base, const NoiseParams& noise, const MergeConfig& cfg)
    : cfg_(cfg), noise_(noise) {
    if (cfg.zoom < 1.0 || cfg.zoom > 3.0) {
        throw InvariantError("zoom must be in [1, 3], got " + std::to_string(cfg.zoom));
    }
    if ((base.width() % 2) != 0 || (base.height() % 2) != 0 || base.width() <= 0 ||
        base.height() <= 0) {
        throw InvariantError("base frame must have positive even dimensions");
    }
    in_w_ = base.width();
    in_h_ = base.height();
    out_w_ = std::max(2, even_floor(cfg.zoom * in_w_));
    out_h_ = std::max(2, even_floor(cfg.zoom * in_h_));

    base_luma_ = decimate_luma(base);
    base_guide_ = compute_guide(base);
    base_demosaic_ = demosaic_bilinear(base);

    snr_ = cfg.snr_override >= 0.0 ? cfg.snr_override : estimate_snr(image_mean(base_luma_), noise);
    tuning_ = tuning_for_snr(snr_);
    if (cfg.tile_size_override > 0) tuning_.tile_size = cfg.tile_size_override;
    cfg_.align.tile_size = tuning_.tile_size;

    tables_ = cfg.robustness && (noise.slope > 0.0 || noise.intercept > 0.0)
                  ? load_or_compute_tables(noise, cfg.mc, cfg.cache_dir)
                  : NoiseTables{cfg.mc.bins, std::vector<double>(cfg.mc.bins, 0.0),
                                std::vector<double>(cfg.mc.bins, 0.0)};

    acc_.assign(static_cast<size_t>(out_w_) * out_h_ * 6, 0);
    mask_sum_.reset(base_luma_.width(), base_luma_.height());

    diag_.snr = snr_;
    diag_.tuning = tuning_;

    meter_.add_persistent(acc_.size() * sizeof(int64_t));
    meter_.add_persistent(base_luma_.byte_size() + base_guide_.byte_size() +
                          base_demosaic_.byte_size() + mask_sum_.byte_size());
}

void MergeEngine::accumulate(const BayerFrame& frame, const AlignmentField& field, bool is_base) {
    if (frame.width() != in_w_ || frame.height() != in_h_) {
        throw InvariantError("frame dimensions disagree with the base frame");
    }
    if (is_base && base_seen_) throw InvariantError("base frame fed twice");

    const auto t0 = std::chrono::steady_clock::now();
    meter_.begin_frame();

    const ImageF luma = dense_luma(frame);
    const KernelField kfield = build_kernel_field_dense(luma, tuning_);
    meter_.add_transient(luma.byte_size() + kfield.byte_size());

    ImageF mask(base_luma_.width(), base_luma_.height(), 1.0f);
    if (cfg_.robustness && !is_base) {
        const RgbImage guide = compute_guide(frame);
        const LocalStats stats = local_statistics(base_guide_, guide, field);
        ImageF sigma, d;
        noise_corrected_stats(stats, tables_, &sigma, &d);
        const MotionPrior prior = motion_prior_scale(field, tuning_);
        mask = robustness_map(sigma, d, prior, tuning_);
        hf_variance_reject(base_luma_, prior, cfg_.loss_threshold, mask);
        meter_.add_transient(guide.byte_size() + stats.byte_size() + sigma.byte_size() +
                             d.byte_size() + mask.byte_size() +
                             prior.extent.size() * 2 * sizeof(float));
    } else {
        meter_.add_transient(mask.byte_size());
    }

    const int threads = cfg_.threads > 0 ? cfg_.threads : default_thread_count();
    parallel_for_rows(out_h_, threads, [&](int y0, int y1) {
        accumulate_rows(frame, field, kfield, mask, y0, y1);
    });

    // Diagnostics: mean mask and mean |v| for this frame.
    double mask_acc = 0.0;
    for (int y = 0; y < mask.height(); ++y) {
        const float* src = mask.row(y);
        float* dst = mask_sum_.row(y);
        for (int x = 0; x < mask.width(); ++x) {
            dst[x] += src[x];
            mask_acc += src[x];
        }
    }
    double v_acc = 0.0;
    for (const Vec2f& v : field.vec) v_acc += v.norm();

    FrameDiagnostics fd;
    fd.frame_index = frames_in_;
    fd.mean_mask = mask.size() ? mask_acc / static_cast<double>(mask.size()) : 1.0;
    fd.mean_abs_v = field.vec.empty() ? 0.0 : v_acc / static_cast<double>(field.vec.size());
    diag_.frames.push_back(fd);

    ++frames_in_;
    if (is_base) base_seen_ = true;
    diag_.peak_bytes = meter_.peak();
    diag_.accumulate_ms +=
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void MergeEngine::accumulate_rows(const BayerFrame& frame, const AlignmentField& field,
                                  const KernelField& kfield, const ImageF& mask, int y0, int y1) {
    const double inv_zoom = 1.0 / cfg_.zoom;
    const bool unit_zoom = cfg_.zoom == 1.0;
    const int mw = mask.width();
    const int mh = mask.height();

    for (int oy = y0; oy < y1; ++oy) {
        const double by = unit_zoom ? oy : oy * inv_zoom;
        int64_t* arow = acc_.data() + static_cast<size_t>(oy) * out_w_ * 6;
        for (int ox = 0; ox < out_w_; ++ox) {
            const double bx = unit_zoom ? ox : ox * inv_zoom;

            const Vec2f v = field.at_pixel(static_cast<float>(bx), static_cast<float>(by));
            const double ux = bx + v.x;
            const double uy = by + v.y;

            const int mx = std::clamp(static_cast<int>(std::lround((bx - 0.5) * 0.5)), 0, mw - 1);
            const int my = std::clamp(static_cast<int>(std::lround((by - 0.5) * 0.5)), 0, mh - 1);
            const double mask_v = mask.at(mx, my);
            if (mask_v <= 0.0) continue;

            const int cx = static_cast<int>(std::lround(ux));
            const int cy = static_cast<int>(std::lround(uy));
            if (cx < -1 || cx > in_w_ || cy < -1 || cy > in_h_) continue;

            const SymMat2 cov =
                kernel_covariance_at(kfield, static_cast<float>(ux), static_cast<float>(uy));
            const InvCov inv = invert_covariance(cov);

            int64_t* apx = arow + static_cast<size_t>(ox) * 6;
            for (int dy = -1; dy <= 1; ++dy) {
                const int sy = cy + dy;
                if (sy < 0 || sy >= in_h_) continue;
                const float* frow = frame.data.row(sy);
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sx = cx + dx;
                    if (sx < 0 || sx >= in_w_) continue;

                    const double ddx = sx - ux;
                    const double ddy = sy - uy;
                    const double q = ddx * (inv.ixx * ddx + inv.ixy * ddy) +
                                     ddy * (inv.ixy * ddx + inv.iyy * ddy);
                    if (q > kSkipQuadform) continue;  // both terms would round to 0

                    const double w = std::exp(-0.5 * std::max(0.0, q)) * mask_v;
                    const double c = frow[sx];
                    const int ch = static_cast<int>(cfa_channel(sx, sy));
                    apx[2 * ch] += std::llround(c * w * kFixedScale);
                    apx[2 * ch + 1] += std::llround(w * kFixedScale);
                }
            }
        }
    }
}

RgbImage MergeEngine::finalize() const {
    RgbImage out(out_w_, out_h_);
    const double inv_zoom = 1.0 / cfg_.zoom;
    const bool unit_zoom = cfg_.zoom == 1.0;

    for (int oy = 0; oy < out_h_; ++oy) {
        const float by = static_cast<float>(unit_zoom ? oy : oy * inv_zoom);
        const int64_t* arow = acc_.data() + static_cast<size_t>(oy) * out_w_ * 6;
        float* r = out.r.row(oy);
        float* g = out.g.row(oy);
        float* b = out.b.row(oy);
        for (int ox = 0; ox < out_w_; ++ox) {
            const float bx = static_cast<float>(unit_zoom ? ox : ox * inv_zoom);
            const int64_t* apx = arow + static_cast<size_t>(ox) * 6;
            for (int ch = 0; ch < 3; ++ch) {
                const int64_t num = apx[2 * ch];
                const int64_t den = apx[2 * ch + 1];
                float val;
                if (den < kDenEpsilon) {
                    // Starved channel: fall back to the demosaiced base frame.
                    val = sample_bilinear(base_demosaic_.plane(ch), bx, by);
                } else {
                    val = static_cast<float>(static_cast<double>(num) / static_cast<double>(den));
                }
                (ch == 0 ? r : (ch == 1 ? g : b))[ox] = std::clamp(val, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

ImageF MergeEngine::mask_mean() const {
    ImageF mean = mask_sum_;
    if (frames_in_ > 0) {
        const float inv = 1.0f / static_cast<float>(frames_in_);
        for (int y = 0; y < mean.height(); ++y) {
            float* row = mean.row(y);
            for (int x = 0; x < mean.width(); ++x) row[x] *= inv;
        }
    }
    return mean;
}

RgbImage merge_burst(const Burst& burst, const MergeConfig& cfg, MergeDiagnostics* diag_out,
                     const std::vector<AlignmentField>* fields_in, ImageF* mask_mean_out) {
    validate_burst(burst);
    if (cfg.base_index < 0 || cfg.base_index >= burst.size()) {
        throw InvariantError("base frame index " + std::to_string(cfg.base_index) +
                             " out of range");
    }
    const int use = cfg.frame_cap > 0 ? std::min(burst.size(), cfg.frame_cap) : burst.size();
    if (cfg.base_index >= use) {
        throw InvariantError("base frame index beyond the frame cap");
    }
    if (fields_in && static_cast<int>(fields_in->size()) < use) {
        throw InvariantError("alignment fields cover " + std::to_string(fields_in->size()) +
                             " frames but the merge needs " + std::to_string(use));
    }

    MergeEngine engine(burst.frames[cfg.base_index], burst.noise, cfg);

    std::vector<AlignmentField> fields;
    if (!fields_in) {
        Burst capped;
        capped.noise = burst.noise;
        capped.frames.assign(burst.frames.begin(), burst.frames.begin() + use);
        AlignConfig acfg = cfg.align;
        acfg.tile_size = engine.tuning().tile_size;
        fields = align_burst(capped, cfg.base_index, acfg);
        fields_in = &fields;
    }

    for (int k = 0; k < use; ++k) {
        engine.accumulate(burst.frames[k], (*fields_in)[k], k == cfg.base_index);
    }

    RgbImage out = engine.finalize();
    if (cfg.finish) out = finish_image(out, cfg.finish_sigma, cfg.finish_amount);
    if (diag_out) *diag_out = engine.diagnostics();
    if (mask_mean_out) *mask_mean_out = engine.mask_mean();
    return out;
}

RgbImage finish_image(const RgbImage& img, double sigma, double amount) {
    RgbImage out(img.width(), img.height());
    const auto& k = simd::active_kernels();
    for (int c = 0; c < 3; ++c) {
        const ImageF& src = img.plane(c);
        const ImageF blurred = gaussian_blur(src, sigma);
        ImageF& dst = out.plane(c);
        for (int y = 0; y < img.height(); ++y) {
            k.scale_diff_add(src.row(y), blurred.row(y), static_cast<float>(amount), dst.row(y),
                             img.width());
        }
        for (int y = 0; y < img.height(); ++y) {
            float* row = dst.row(y);
            for (int x = 0; x < img.width(); ++x) {
                const float v = std::clamp(row[x], 0.0f, 1.0f);
                row[x] = v * v * (3.0f - 2.0f * v);  // gentle s-curve
            }
        }
    }
    return out;
}

void write_merge_diagnostics_csv(const std::string& path, const MergeDiagnostics& diag) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "# snr=" << diag.snr << " tile_size=" << diag.tuning.tile_size
      << " k_detail=" << diag.tuning.k_detail << " k_denoise=" << diag.tuning.k_denoise
      << " peak_bytes=" << diag.peak_bytes << "\n";
    f << "frame,mean_mask,mean_abs_v\n";
    for (const FrameDiagnostics& fd : diag.frames) {
        f << fd.frame_index << "," << fd.mean_mask << "," << fd.mean_abs_v << "\n";
    }
    if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace burstfuse
