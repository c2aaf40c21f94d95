#include "burstfuse/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>

// AVX2 variants. The exact-order kernels mirror the scalar grouping
// (see kernels.hpp) so results are bitwise identical; sum_sq_diff uses
// double lanes with fma and is tolerance-tested instead.

namespace burstfuse::simd {
namespace {

double sum_sq_diff_avx2(const float* a, const float* b, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 va = _mm256_loadu_ps(a + i);
        const __m256 vb = _mm256_loadu_ps(b + i);
        const __m256d a_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(va));
        const __m256d b_lo = _mm256_cvtps_pd(_mm256_castps256_ps128(vb));
        const __m256d a_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(va, 1));
        const __m256d b_hi = _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1));
        const __m256d d_lo = _mm256_sub_pd(a_lo, b_lo);
        const __m256d d_hi = _mm256_sub_pd(a_hi, b_hi);
        acc0 = _mm256_fmadd_pd(d_lo, d_lo, acc0);
        acc1 = _mm256_fmadd_pd(d_hi, d_hi, acc1);
    }
    const __m256d acc = _mm256_add_pd(acc0, acc1);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        total += d * d;
    }
    return total;
}

void box_down2_avx2(const float* src, int src_w, int src_h, float* dst) {
    const int dw = src_w / 2;
    const int dh = src_h / 2;
    const __m256 quarter = _mm256_set1_ps(0.25f);
    const __m256i unscramble = _mm256_setr_epi32(0, 1, 4, 5, 2, 3, 6, 7);
    for (int j = 0; j < dh; ++j) {
        const float* r0 = src + static_cast<size_t>(2 * j) * src_w;
        const float* r1 = r0 + src_w;
        float* out = dst + static_cast<size_t>(j) * dw;
        int i = 0;
        for (; i + 8 <= dw; i += 8) {
            // hadd pairs within each source row first, then add the rows:
            // same ((a+b)+(c+d)) grouping as the scalar kernel.
            const __m256 t0 = _mm256_loadu_ps(r0 + 2 * i);
            const __m256 t1 = _mm256_loadu_ps(r0 + 2 * i + 8);
            const __m256 u0 = _mm256_loadu_ps(r1 + 2 * i);
            const __m256 u1 = _mm256_loadu_ps(r1 + 2 * i + 8);
            const __m256 top = _mm256_hadd_ps(t0, t1);
            const __m256 bot = _mm256_hadd_ps(u0, u1);
            __m256 sum = _mm256_add_ps(top, bot);
            sum = _mm256_permutevar8x32_ps(sum, unscramble);
            _mm256_storeu_ps(out + i, _mm256_mul_ps(sum, quarter));
        }
        for (; i < dw; ++i) {
            const float top = r0[2 * i] + r0[2 * i + 1];
            const float bot = r1[2 * i] + r1[2 * i + 1];
            out[i] = (top + bot) * 0.25f;
        }
    }
}

void sliding_sum3_row_avx2(const float* src, int n, float* dst) {
    if (n == 0) return;
    dst[0] = (src[0] + src[0]) + src[std::min(1, n - 1)];
    int i = 1;
    for (; i + 8 <= n - 1; i += 8) {
        const __m256 l = _mm256_loadu_ps(src + i - 1);
        const __m256 c = _mm256_loadu_ps(src + i);
        const __m256 r = _mm256_loadu_ps(src + i + 1);
        _mm256_storeu_ps(dst + i, _mm256_add_ps(_mm256_add_ps(l, c), r));
    }
    for (; i < n; ++i) {
        const float l = src[std::max(i - 1, 0)];
        const float c = src[i];
        const float r = src[std::min(i + 1, n - 1)];
        dst[i] = (l + c) + r;
    }
}

void sliding_min5_row_avx2(const float* src, int n, float* dst) {
    int i = 0;
    for (; i < std::min(2, n); ++i) {
        float m = src[i];
        for (int k = -2; k <= 2; ++k) m = std::min(m, src[std::clamp(i + k, 0, n - 1)]);
        dst[i] = m;
    }
    for (; i + 8 <= n - 2; i += 8) {
        const __m256 m2l = _mm256_loadu_ps(src + i - 2);
        const __m256 m1l = _mm256_loadu_ps(src + i - 1);
        const __m256 c = _mm256_loadu_ps(src + i);
        const __m256 m1r = _mm256_loadu_ps(src + i + 1);
        const __m256 m2r = _mm256_loadu_ps(src + i + 2);
        __m256 m = _mm256_min_ps(_mm256_min_ps(m2l, m1l), _mm256_min_ps(m1r, m2r));
        m = _mm256_min_ps(m, c);
        _mm256_storeu_ps(dst + i, m);
    }
    for (; i < n; ++i) {
        float m = src[i];
        for (int k = -2; k <= 2; ++k) m = std::min(m, src[std::clamp(i + k, 0, n - 1)]);
        dst[i] = m;
    }
}

void scale_diff_add_avx2(const float* a, const float* b, float amount, float* dst, int n) {
    const __m256 amt = _mm256_set1_ps(amount);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 va = _mm256_loadu_ps(a + i);
        const __m256 vb = _mm256_loadu_ps(b + i);
        // mul + add, deliberately not fma, to match the scalar reference.
        const __m256 scaled = _mm256_mul_ps(amt, _mm256_sub_ps(va, vb));
        _mm256_storeu_ps(dst + i, _mm256_add_ps(va, scaled));
    }
    for (; i < n; ++i) {
        dst[i] = a[i] + amount * (a[i] - b[i]);
    }
}

}  // namespace

namespace detail {

const KernelTable& avx2_kernels_impl() {
    static const KernelTable table = {
        "avx2",
        sum_sq_diff_avx2,
        box_down2_avx2,
        sliding_sum3_row_avx2,
        sliding_min5_row_avx2,
        scale_diff_add_avx2,
    };
    return table;
}

}  // namespace detail
}  // namespace burstfuse::simd
