#include "burstfuse/kernel_field.hpp"

#include <algorithm>
#include <cmath>

#include "burstfuse/errors.hpp"

namespace burstfuse {
namespace {

constexpr double kVarianceFloor = 1e-6;  // px^2
constexpr double kIsotropicEps = 1e-12;

}  // namespace

EigenPair eigen2x2(const SymMat2& m) {
    EigenPair out;
    const double tr = m.xx + m.yy;
    const double diff = m.xx - m.yy;
    const double disc = std::sqrt(diff * diff + 4.0 * m.xy * m.xy);
    out.l1 = 0.5 * (tr + disc);
    out.l2 = std::max(0.0, 0.5 * (tr - disc));

    if (disc < kIsotropicEps) {
        out.e1 = Vec2f(1.0f, 0.0f);
    } else if (std::abs(m.xy) > kIsotropicEps) {
        // (b, l1 - a) is an eigenvector for l1; pick the better-conditioned
        // of the two analytic forms.
        double ex, ey;
        if (std::abs(m.xy) >= std::abs(out.l1 - m.xx)) {
            ex = m.xy;
            ey = out.l1 - m.xx;
        } else {
            ex = out.l1 - m.yy;
            ey = m.xy;
        }
        const double n = std::sqrt(ex * ex + ey * ey);
        out.e1 = Vec2f(static_cast<float>(ex / n), static_cast<float>(ey / n));
    } else {
        out.e1 = m.xx >= m.yy ? Vec2f(1.0f, 0.0f) : Vec2f(0.0f, 1.0f);
    }
    out.e2 = Vec2f(-out.e1.y, out.e1.x);
    return out;
}

SymMat2 structure_tensor_at(const ImageF& luma, int x, int y) {
    SymMat2 t;
    // Central differences, so gx and gy are sampled at the same point.
    // Half-pixel-staggered (forward) differences decorrelate the two
    // components on fine diagonal texture: the product gx*gy picks up a
    // cos(omega/2)-style phase factor that can shrink or even flip the
    // cross term near Nyquist, which mis-orients the kernels exactly where
    // orientation matters most.
    for (int qy = y - 1; qy <= y + 1; ++qy) {
        for (int qx = x - 1; qx <= x + 1; ++qx) {
            const double gx =
                0.5 * (luma.at_clamped(qx + 1, qy) - luma.at_clamped(qx - 1, qy));
            const double gy =
                0.5 * (luma.at_clamped(qx, qy + 1) - luma.at_clamped(qx, qy - 1));
            t.xx += gx * gx;
            t.xy += gx * gy;
            t.yy += gy * gy;
        }
    }
    const double norm = 1.0 / 9.0;
    t.xx *= norm;
    t.xy *= norm;
    t.yy *= norm;
    return t;
}

KernelShape kernel_shape_params(double l1, double l2, const TuningParams& tune) {
    KernelShape s;
    const double sum = l1 + l2;
    s.anisotropy = sum < kIsotropicEps ? 1.0 : 1.0 + std::sqrt(std::max(0.0, l1 - l2) / sum);
    s.denoise_blend = std::clamp(1.0 - std::sqrt(std::max(0.0, l1)) / tune.d_tr + tune.d_th, 0.0, 1.0);

    const double k1_hat = tune.k_detail * tune.k_stretch * s.anisotropy;
    const double k2_hat = tune.k_detail / (tune.k_shrink * s.anisotropy);
    const double denoise = tune.k_detail * tune.k_denoise;
    const double k1 = (1.0 - s.denoise_blend) * k1_hat + s.denoise_blend * denoise;
    const double k2 = (1.0 - s.denoise_blend) * k2_hat + s.denoise_blend * denoise;
    s.k1 = std::max(kVarianceFloor, k1 * k1);
    s.k2 = std::max(kVarianceFloor, k2 * k2);
    return s;
}

SymMat2 assemble_covariance(Vec2f axis1, double k1, double k2) {
    const double ax = axis1.x;
    const double ay = axis1.y;
    SymMat2 m;
    m.xx = k1 * ax * ax + k2 * ay * ay;
    m.xy = (k1 - k2) * ax * ay;
    m.yy = k1 * ay * ay + k2 * ax * ax;
    return m;
}

KernelField build_kernel_field(const ImageF& luma, const TuningParams& tune) {
    KernelField f;
    f.width = luma.width();
    f.height = luma.height();
    const size_t n = static_cast<size_t>(f.width) * f.height;
    f.xx.resize(n);
    f.xy.resize(n);
    f.yy.resize(n);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            const EigenPair eig = eigen2x2(structure_tensor_at(luma, x, y));
            const KernelShape shape = kernel_shape_params(eig.l1, eig.l2, tune);
            // Stretch along the edge tangent (e2), stay narrow along the
            // gradient (e1): averaging runs with the edge, not across it.
            const SymMat2 cov = assemble_covariance(eig.e2, shape.k1, shape.k2);
            const size_t i = static_cast<size_t>(y) * f.width + x;
            f.xx[i] = static_cast<float>(cov.xx);
            f.xy[i] = static_cast<float>(cov.xy);
            f.yy[i] = static_cast<float>(cov.yy);
        }
    }
    return f;
}

KernelField build_kernel_field_dense(const ImageF& luma, const TuningParams& tune) {
    KernelField f;
    f.width = luma.width() / 2;
    f.height = luma.height() / 2;
    const size_t n = static_cast<size_t>(f.width) * f.height;
    f.xx.resize(n);
    f.xy.resize(n);
    f.yy.resize(n);
    for (int j = 0; j < f.height; ++j) {
        for (int i = 0; i < f.width; ++i) {
            // Mean outer product of the four full-res gradients inside the
            // 2x2 quad this half-res cell covers.  Each difference spans two
            // full-res pixels -- one half-res pixel -- and is deliberately
            // not halved, so gradient magnitudes keep the same scale as
            // build_kernel_field and d_th/d_tr keep their meaning, while the
            // orientation is measured at full resolution where fine texture
            // sits well below Nyquist.
            SymMat2 t;
            for (int qy = 2 * j; qy <= 2 * j + 1; ++qy) {
                for (int qx = 2 * i; qx <= 2 * i + 1; ++qx) {
                    const double gx =
                        luma.at_clamped(qx + 1, qy) - luma.at_clamped(qx - 1, qy);
                    const double gy =
                        luma.at_clamped(qx, qy + 1) - luma.at_clamped(qx, qy - 1);
                    t.xx += gx * gx;
                    t.xy += gx * gy;
                    t.yy += gy * gy;
                }
            }
            t.xx *= 0.25;
            t.xy *= 0.25;
            t.yy *= 0.25;
            const EigenPair eig = eigen2x2(t);
            const KernelShape shape = kernel_shape_params(eig.l1, eig.l2, tune);
            const SymMat2 cov = assemble_covariance(eig.e2, shape.k1, shape.k2);
            const size_t idx = static_cast<size_t>(j) * f.width + i;
            f.xx[idx] = static_cast<float>(cov.xx);
            f.xy[idx] = static_cast<float>(cov.xy);
            f.yy[idx] = static_cast<float>(cov.yy);
        }
    }
    return f;
}

SymMat2 kernel_covariance_at(const KernelField& field, float x, float y) {
    // Half-res pixel (i, j) sits at full-res position (2i + 0.5, 2j + 0.5).
    const float hx = (x - 0.5f) * 0.5f;
    const float hy = (y - 0.5f) * 0.5f;
    const int x0 = static_cast<int>(std::floor(hx));
    const int y0 = static_cast<int>(std::floor(hy));
    const double fx = hx - x0;
    const double fy = hy - y0;

    auto fetch = [&field](const std::vector<float>& plane, int px, int py) {
        px = std::clamp(px, 0, field.width - 1);
        py = std::clamp(py, 0, field.height - 1);
        return static_cast<double>(plane[static_cast<size_t>(py) * field.width + px]);
    };
    auto lerp2 = [&](const std::vector<float>& plane) {
        const double v00 = fetch(plane, x0, y0);
        const double v10 = fetch(plane, x0 + 1, y0);
        const double v01 = fetch(plane, x0, y0 + 1);
        const double v11 = fetch(plane, x0 + 1, y0 + 1);
        const double top = v00 + (v10 - v00) * fx;
        const double bot = v01 + (v11 - v01) * fx;
        return top + (bot - top) * fy;
    };

    SymMat2 m;
    m.xx = lerp2(field.xx);
    m.xy = lerp2(field.xy);
    m.yy = lerp2(field.yy);
    return m;
}

InvCov invert_covariance(const SymMat2& cov) {
    const double det = cov.xx * cov.yy - cov.xy * cov.xy;
    if (det <= 0.0) {
        throw InvariantError("kernel covariance is not positive definite (det " +
                             std::to_string(det) + ")");
    }
    InvCov inv;
    inv.ixx = cov.yy / det;
    inv.ixy = -cov.xy / det;
    inv.iyy = cov.xx / det;
    return inv;
}

double sample_weight(double dx, double dy, const InvCov& inv) {
    const double q = dx * (inv.ixx * dx + inv.ixy * dy) + dy * (inv.ixy * dx + inv.iyy * dy);
    return std::exp(-0.5 * std::max(0.0, q));
}

void kernel_debug_maps(const ImageF& luma, const TuningParams& tune, ImageF* anisotropy_map,
                       ImageF* denoise_map) {
    const int w = luma.width();
    const int h = luma.height();
    if (anisotropy_map) anisotropy_map->reset(w, h);
    if (denoise_map) denoise_map->reset(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const EigenPair eig = eigen2x2(structure_tensor_at(luma, x, y));
            const KernelShape shape = kernel_shape_params(eig.l1, eig.l2, tune);
            if (anisotropy_map) {
                anisotropy_map->at(x, y) = static_cast<float>(shape.anisotropy - 1.0);
            }
            if (denoise_map) denoise_map->at(x, y) = static_cast<float>(shape.denoise_blend);
        }
    }
}

}  // namespace burstfuse
