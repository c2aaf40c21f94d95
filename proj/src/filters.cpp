#include "burstfuse/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "burstfuse/simd/kernels.hpp"

namespace burstfuse {

ImageF box3_sum(const ImageF& img) {
    const int w = img.width();
    const int h = img.height();
    const auto& k = simd::active_kernels();

    ImageF rows(w, h);
    for (int y = 0; y < h; ++y) k.sliding_sum3_row(img.row(y), w, rows.row(y));

    ImageF out(w, h);
    for (int y = 0; y < h; ++y) {
        const float* up = rows.row(std::max(y - 1, 0));
        const float* mid = rows.row(y);
        const float* down = rows.row(std::min(y + 1, h - 1));
        float* dst = out.row(y);
        for (int x = 0; x < w; ++x) dst[x] = (up[x] + mid[x]) + down[x];
    }
    return out;
}

ImageF min5_filter(const ImageF& img) {
    const int w = img.width();
    const int h = img.height();
    const auto& k = simd::active_kernels();

    ImageF rows(w, h);
    for (int y = 0; y < h; ++y) k.sliding_min5_row(img.row(y), w, rows.row(y));

    ImageF out(w, h);
    for (int y = 0; y < h; ++y) {
        float* dst = out.row(y);
        const float* r0 = rows.row(std::clamp(y - 2, 0, h - 1));
        const float* r1 = rows.row(std::clamp(y - 1, 0, h - 1));
        const float* r2 = rows.row(y);
        const float* r3 = rows.row(std::clamp(y + 1, 0, h - 1));
        const float* r4 = rows.row(std::clamp(y + 2, 0, h - 1));
        for (int x = 0; x < w; ++x) {
            dst[x] = std::min(std::min(std::min(r0[x], r1[x]), std::min(r3[x], r4[x])), r2[x]);
        }
    }
    return out;
}

ImageF gaussian_blur(const ImageF& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (float& v : kernel) v = static_cast<float>(v / sum);

    const int w = img.width();
    const int h = img.height();
    ImageF tmp(w, h);
    for (int y = 0; y < h; ++y) {
        const float* src = img.row(y);
        float* dst = tmp.row(y);
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * src[std::clamp(x + i, 0, w - 1)];
            }
            dst[x] = acc;
        }
    }
    ImageF out(w, h);
    for (int y = 0; y < h; ++y) {
        float* dst = out.row(y);
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) {
                acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
            }
            dst[x] = acc;
        }
    }
    return out;
}

}  // namespace burstfuse
