#include "burstfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "burstfuse/errors.hpp"
#include "burstfuse/simd/kernels.hpp"

namespace burstfuse {
namespace {

constexpr double kPsnrCap = 99.0;
constexpr double kSsimC1 = 1e-4;
constexpr double kSsimC2 = 9e-4;
constexpr int kSsimWindow = 8;

// Summed-area table with a zero top row/left column.
class Integral {
  public:
    Integral(const ImageF& a, const ImageF& b, int mode) : w_(a.width() + 1) {
        table_.assign(static_cast<size_t>(a.width() + 1) * (a.height() + 1), 0.0);
        for (int y = 0; y < a.height(); ++y) {
            const float* ra = a.row(y);
            const float* rb = b.row(y);
            double rowsum = 0.0;
            for (int x = 0; x < a.width(); ++x) {
                const double va = ra[x];
                const double vb = rb[x];
                rowsum += mode == 0 ? va : (mode == 1 ? va * va : va * vb);
                table_[static_cast<size_t>(y + 1) * w_ + (x + 1)] =
                    table_[static_cast<size_t>(y) * w_ + (x + 1)] + rowsum;
            }
        }
    }

    // Sum over [x, x + n) x [y, y + n).
    double window(int x, int y, int n) const {
        const size_t r0 = static_cast<size_t>(y) * w_;
        const size_t r1 = static_cast<size_t>(y + n) * w_;
        return table_[r1 + x + n] - table_[r1 + x] - table_[r0 + x + n] + table_[r0 + x];
    }

  private:
    int w_;
    std::vector<double> table_;
};

void require_same_shape(const RgbImage& a, const RgbImage& b) {
    if (!a.same_shape(b)) throw InvariantError("metric inputs disagree on dimensions");
}

}  // namespace

double mse_rgb(const RgbImage& a, const RgbImage& b) {
    require_same_shape(a, b);
    const auto& k = simd::active_kernels();
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
        const ImageF& pa = a.plane(c);
        const ImageF& pb = b.plane(c);
        for (int y = 0; y < a.height(); ++y) {
            acc += k.sum_sq_diff(pa.row(y), pb.row(y), static_cast<size_t>(a.width()));
        }
    }
    return acc / (3.0 * a.width() * a.height());
}

double psnr_rgb(const RgbImage& a, const RgbImage& b) {
    const double mse = mse_rgb(a, b);
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim_rgb(const RgbImage& a, const RgbImage& b) {
    require_same_shape(a, b);
    const int w = a.width();
    const int h = a.height();
    const int n = kSsimWindow;
    if (w < n || h < n) throw InvariantError("images smaller than the SSIM window");
    const double inv_area = 1.0 / (n * n);

    double total = 0.0;
    long windows = 0;
    for (int c = 0; c < 3; ++c) {
        const ImageF& pa = a.plane(c);
        const ImageF& pb = b.plane(c);
        const Integral sum_a(pa, pa, 0);
        const Integral sum_b(pb, pb, 0);
        const Integral sum_aa(pa, pa, 1);
        const Integral sum_bb(pb, pb, 1);
        const Integral sum_ab(pa, pb, 2);

        for (int y = 0; y + n <= h; ++y) {
            for (int x = 0; x + n <= w; ++x) {
                const double mu_a = sum_a.window(x, y, n) * inv_area;
                const double mu_b = sum_b.window(x, y, n) * inv_area;
                const double var_a = std::max(0.0, sum_aa.window(x, y, n) * inv_area - mu_a * mu_a);
                const double var_b = std::max(0.0, sum_bb.window(x, y, n) * inv_area - mu_b * mu_b);
                const double cov = sum_ab.window(x, y, n) * inv_area - mu_a * mu_b;
                const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
                const double den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
                total += num / den;
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

double sharpness(const RgbImage& img) {
    const ImageF luma = luma_of_rgb(img);
    const int w = luma.width();
    const int h = luma.height();
    if (w < 2 || h < 2) return 0.0;

    double acc_x = 0.0;
    for (int y = 0; y < h; ++y) {
        const float* row = luma.row(y);
        for (int x = 0; x + 1 < w; ++x) {
            const double g = static_cast<double>(row[x + 1]) - row[x];
            acc_x += g * g;
        }
    }
    double acc_y = 0.0;
    for (int y = 0; y + 1 < h; ++y) {
        const float* row = luma.row(y);
        const float* next = luma.row(y + 1);
        for (int x = 0; x < w; ++x) {
            const double g = static_cast<double>(next[x]) - row[x];
            acc_y += g * g;
        }
    }
    return acc_x / (static_cast<double>(w - 1) * h) + acc_y / (static_cast<double>(w) * (h - 1));
}

RgbImage crop_border(const RgbImage& img, int border) {
    if (border <= 0) return img;
    const int w = img.width() - 2 * border;
    const int h = img.height() - 2 * border;
    if (w < 1 || h < 1) throw InvariantError("border crop larger than the image");
    RgbImage out(w, h);
    for (int c = 0; c < 3; ++c) {
        const ImageF& src = img.plane(c);
        ImageF& dst = out.plane(c);
        for (int y = 0; y < h; ++y) {
            const float* s = src.row(y + border) + border;
            std::copy(s, s + w, dst.row(y));
        }
    }
    return out;
}

ImageF luma_of_rgb(const RgbImage& img) {
    ImageF luma(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        const float* r = img.r.row(y);
        const float* g = img.g.row(y);
        const float* b = img.b.row(y);
        float* dst = luma.row(y);
        for (int x = 0; x < img.width(); ++x) {
            dst[x] = (r[x] + g[x] + b[x]) / 3.0f;
        }
    }
    return luma;
}

}  // namespace burstfuse
