#pragma once

#include "burstfuse/image.hpp"

namespace burstfuse {

// Mean squared error over the three channels of same-shaped [0, 1] images.
double mse_rgb(const RgbImage& a, const RgbImage& b);

// 10 * log10(1 / mse) in dB, capped at 99 for (near-)identical images.
double psnr_rgb(const RgbImage& a, const RgbImage& b);

// Structural similarity, 8x8 box windows at stride 1, C1 = 1e-4, C2 = 9e-4,
// averaged over windows and channels.
double ssim_rgb(const RgbImage& a, const RgbImage& b);

// Mean squared forward-difference gradient energy of the channel-mean luma;
// each direction is averaged over its valid region, so a unit-slope ramp
// scores exactly 1.
double sharpness(const RgbImage& img);

// Removes `border` pixels from every side (metric stabilization).
RgbImage crop_border(const RgbImage& img, int border);

ImageF luma_of_rgb(const RgbImage& img);

}  // namespace burstfuse
