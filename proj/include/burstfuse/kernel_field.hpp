#pragma once

#include <vector>

#include "burstfuse/image.hpp"
#include "burstfuse/noise_model.hpp"

namespace burstfuse {

struct SymMat2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

// l1 >= l2 >= 0; e1 is the dominant (gradient) direction, e2 = e1 rotated
// 90 degrees. Near-isotropic input (l1 - l2 < 1e-12) returns e1 = (1, 0).
struct EigenPair {
    double l1 = 0.0;
    double l2 = 0.0;
    Vec2f e1{1.0f, 0.0f};
    Vec2f e2{0.0f, 1.0f};
};

EigenPair eigen2x2(const SymMat2& m);

// Local gradient structure around (x, y): the mean outer product of the
// co-located central-difference gradients over the 3x3 window,
// border-clamped.  Central differences keep gx and gy sampled at the same
// point; staggered differences dephase the cross term on fine diagonal
// texture and can flip its sign, mis-orienting the kernels.
SymMat2 structure_tensor_at(const ImageF& luma, int x, int y);

// Kernel variances along the stretched axis (k1) and the narrow axis (k2),
// in full-res px^2. Both are floored at 1e-6 so covariances stay invertible.
struct KernelShape {
    double k1 = 0.0;
    double k2 = 0.0;
    double anisotropy = 1.0;  // 1 (isotropic) .. 2 (pure edge)
    double denoise_blend = 0.0;  // 0 (detail) .. 1 (flat, denoise)
};

KernelShape kernel_shape_params(double l1, double l2, const TuningParams& tune);

// Covariance with variance k1 along axis1 and k2 across it.
SymMat2 assemble_covariance(Vec2f axis1, double k1, double k2);

// Half-resolution grid of kernel covariances (entries in full-res px^2).
// The stretched axis follows the local edge tangent, the narrow axis the
// gradient, so kernels average along edges rather than across them.
struct KernelField {
    int width = 0;
    int height = 0;
    std::vector<float> xx, xy, yy;

    size_t byte_size() const { return (xx.size() + xy.size() + yy.size()) * sizeof(float); }
};

KernelField build_kernel_field(const ImageF& luma, const TuningParams& tune);

// Same field measured on the full-resolution quad-mean luma (see dense_luma):
// the tensor of half-res cell (i, j) averages the four central-difference
// gradients inside its 2x2 quad.  Each difference spans one half-res pixel,
// so magnitudes match build_kernel_field, but orientation comes from
// full-resolution samples, which stay faithful on texture that is near
// Nyquist at half resolution.
KernelField build_kernel_field_dense(const ImageF& luma, const TuningParams& tune);

// Bilinearly interpolated covariance at full-res coordinates.
SymMat2 kernel_covariance_at(const KernelField& field, float x, float y);

struct InvCov {
    double ixx = 0.0;
    double ixy = 0.0;
    double iyy = 0.0;
};

InvCov invert_covariance(const SymMat2& cov);

// exp(-0.5 * d^T Omega^-1 d) for displacement d = (dx, dy) in full-res px.
double sample_weight(double dx, double dy, const InvCov& inv);

// Diagnostic maps over the half-res grid: anisotropy (scaled to [0, 1]) and
// the flat-region denoise blend factor.
void kernel_debug_maps(const ImageF& luma, const TuningParams& tune, ImageF* anisotropy_map,
                       ImageF* denoise_map);

}  // namespace burstfuse
