#include "burstfuse/simd/kernels.hpp"

#include <algorithm>

// Reference implementations. Compiled with -ffp-contract=off so the stated
// evaluation order is exactly what the hardware executes.

namespace burstfuse::simd {
namespace {

double sum_sq_diff_scalar(const float* a, const float* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

void box_down2_scalar(const float* src, int src_w, int src_h, float* dst) {
    const int dw = src_w / 2;
    const int dh = src_h / 2;
    for (int j = 0; j < dh; ++j) {
        const float* r0 = src + static_cast<size_t>(2 * j) * src_w;
        const float* r1 = r0 + src_w;
        float* out = dst + static_cast<size_t>(j) * dw;
        for (int i = 0; i < dw; ++i) {
            const float top = r0[2 * i] + r0[2 * i + 1];
            const float bot = r1[2 * i] + r1[2 * i + 1];
            out[i] = (top + bot) * 0.25f;
        }
    }
}

void sliding_sum3_row_scalar(const float* src, int n, float* dst) {
    for (int i = 0; i < n; ++i) {
        const float l = src[std::max(i - 1, 0)];
        const float c = src[i];
        const float r = src[std::min(i + 1, n - 1)];
        dst[i] = (l + c) + r;
    }
}

void sliding_min5_row_scalar(const float* src, int n, float* dst) {
    for (int i = 0; i < n; ++i) {
        float m = src[i];
        for (int k = -2; k <= 2; ++k) {
            m = std::min(m, src[std::clamp(i + k, 0, n - 1)]);
        }
        dst[i] = m;
    }
}

void scale_diff_add_scalar(const float* a, const float* b, float amount, float* dst, int n) {
    for (int i = 0; i < n; ++i) {
        dst[i] = a[i] + amount * (a[i] - b[i]);
    }
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table = {
        "scalar",
        sum_sq_diff_scalar,
        box_down2_scalar,
        sliding_sum3_row_scalar,
        sliding_min5_row_scalar,
        scale_diff_add_scalar,
    };
    return table;
}

}  // namespace burstfuse::simd
