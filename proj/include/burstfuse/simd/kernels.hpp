#pragma once

#include <cstddef>
#include <string>

namespace burstfuse::simd {

// Hot-loop primitives with interchangeable scalar and AVX2 implementations.
// The scalar versions are the reference; vector versions must reproduce them
// bit-for-bit except where noted (sum_sq_diff uses a different summation tree
// and is equivalence-tested under a tolerance instead).
//
// Fixed evaluation order contracts (needed for bitwise agreement):
//   box_down2        dst = ((a + b) + (c + d)) * 0.25f  per 2x2 quad
//   sliding_sum3_row dst[i] = (s[i-1] + s[i]) + s[i+1]  borders clamped
//   sliding_min5_row dst[i] = min(s[i-2..i+2])          borders clamped
//   scale_diff_add   dst[i] = a[i] + amount * (a[i] - b[i])   (no fma)
struct KernelTable {
    const char* name;
    double (*sum_sq_diff)(const float* a, const float* b, size_t n);
    void (*box_down2)(const float* src, int src_w, int src_h, float* dst);
    void (*sliding_sum3_row)(const float* src, int n, float* dst);
    void (*sliding_min5_row)(const float* src, int n, float* dst);
    void (*scale_diff_add)(const float* a, const float* b, float amount, float* dst, int n);
};

const KernelTable& scalar_kernels();

// Null when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels_or_null();

// Picks the implementation: "auto" (best supported), "scalar", or "avx2".
// Throws UsageError for unknown names or unsupported explicit requests.
void select_kernels(const std::string& name);

// Active table; defaults to the "auto" choice (honoring the BURSTFUSE_SIMD
// environment variable) on first use.
const KernelTable& active_kernels();
const char* active_kernel_name();

}  // namespace burstfuse::simd
