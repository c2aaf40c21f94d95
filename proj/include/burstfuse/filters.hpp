#pragma once

#include "burstfuse/image.hpp"

namespace burstfuse {

// Border-clamped separable 3x3 sliding sum.
ImageF box3_sum(const ImageF& img);

// Border-clamped 5x5 sliding minimum.
ImageF min5_filter(const ImageF& img);

// Separable Gaussian blur, kernel truncated at three sigma.
ImageF gaussian_blur(const ImageF& img, double sigma);

}  // namespace burstfuse
