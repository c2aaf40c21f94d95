#include "burstfuse/simd/kernels.hpp"

#include <cstdlib>

#include "burstfuse/errors.hpp"

namespace burstfuse::simd {

#if BURSTFUSE_HAVE_AVX2
namespace detail {
const KernelTable& avx2_kernels_impl();
}
#endif

const KernelTable* avx2_kernels_or_null() {
#if BURSTFUSE_HAVE_AVX2
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return &detail::avx2_kernels_impl();
    }
#endif
    return nullptr;
}

namespace {

const KernelTable* g_active = nullptr;

const KernelTable& resolve(const std::string& name) {
    if (name == "scalar") return scalar_kernels();
    if (name == "avx2") {
        const KernelTable* t = avx2_kernels_or_null();
        if (!t) throw UsageError("simd variant 'avx2' not supported on this build/CPU");
        return *t;
    }
    if (name == "auto") {
        const KernelTable* t = avx2_kernels_or_null();
        return t ? *t : scalar_kernels();
    }
    throw UsageError("unknown simd variant '" + name + "' (expected auto, scalar, or avx2)");
}

}  // namespace

void select_kernels(const std::string& name) { g_active = &resolve(name); }

const KernelTable& active_kernels() {
    if (!g_active) {
        const char* env = std::getenv("BURSTFUSE_SIMD");
        g_active = &resolve(env && *env ? env : "auto");
    }
    return *g_active;
}

const char* active_kernel_name() { return active_kernels().name; }

}  // namespace burstfuse::simd
