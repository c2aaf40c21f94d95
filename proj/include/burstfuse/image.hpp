#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace burstfuse {

struct Vec2f {
    float x = 0.0f;
    float y = 0.0f;

    Vec2f() = default;
    Vec2f(float x_, float y_) : x(x_), y(y_) {}

    Vec2f operator+(Vec2f o) const { return {x + o.x, y + o.y}; }
    Vec2f operator-(Vec2f o) const { return {x - o.x, y - o.y}; }
    Vec2f operator*(float s) const { return {x * s, y * s}; }
    float norm() const { return std::sqrt(x * x + y * y); }
};

// Row-major single-channel image. Everything in the pipeline is linear
// intensity in [0, 1] unless a function says otherwise.
template <typename T>
class Image {
  public:
    Image() = default;
    Image(int width, int height, T fill = T{}) { reset(width, height, fill); }

    void reset(int width, int height, T fill = T{}) {
        assert(width >= 0 && height >= 0);
        w_ = width;
        h_ = height;
        data_.assign(static_cast<size_t>(width) * height, fill);
    }

    int width() const { return w_; }
    int height() const { return h_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }
    size_t byte_size() const { return data_.size() * sizeof(T); }

    T* row(int y) { return data_.data() + static_cast<size_t>(y) * w_; }
    const T* row(int y) const { return data_.data() + static_cast<size_t>(y) * w_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& at(int x, int y) {
        assert(x >= 0 && x < w_ && y >= 0 && y < h_);
        return data_[static_cast<size_t>(y) * w_ + x];
    }
    const T& at(int x, int y) const {
        assert(x >= 0 && x < w_ && y >= 0 && y < h_);
        return data_[static_cast<size_t>(y) * w_ + x];
    }

    // Border-clamped integer fetch.
    T at_clamped(int x, int y) const {
        x = std::clamp(x, 0, w_ - 1);
        y = std::clamp(y, 0, h_ - 1);
        return data_[static_cast<size_t>(y) * w_ + x];
    }

    bool same_shape(const Image& o) const { return w_ == o.w_ && h_ == o.h_; }

  private:
    int w_ = 0;
    int h_ = 0;
    std::vector<T> data_;
};

using ImageF = Image<float>;
using ImageU16 = Image<uint16_t>;
using ImageU8 = Image<uint8_t>;

// Border-clamped bilinear sample at continuous pixel coordinates, where
// integer coordinates land exactly on pixel centers.
inline float sample_bilinear(const ImageF& img, float x, float y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const float fx = x - static_cast<float>(x0);
    const float fy = y - static_cast<float>(y0);
    const float v00 = img.at_clamped(x0, y0);
    const float v10 = img.at_clamped(x0 + 1, y0);
    const float v01 = img.at_clamped(x0, y0 + 1);
    const float v11 = img.at_clamped(x0 + 1, y0 + 1);
    const float top = v00 + (v10 - v00) * fx;
    const float bot = v01 + (v11 - v01) * fx;
    return top + (bot - top) * fy;
}

// Planar RGB in linear [0, 1].
struct RgbImage {
    ImageF r, g, b;

    RgbImage() = default;
    RgbImage(int width, int height) : r(width, height), g(width, height), b(width, height) {}

    int width() const { return r.width(); }
    int height() const { return r.height(); }
    bool same_shape(const RgbImage& o) const { return r.same_shape(o.r); }
    size_t byte_size() const { return r.byte_size() + g.byte_size() + b.byte_size(); }

    const ImageF& plane(int c) const { return c == 0 ? r : (c == 1 ? g : b); }
    ImageF& plane(int c) { return c == 0 ? r : (c == 1 ? g : b); }
};

inline int round_to_int(float v) { return static_cast<int>(std::lround(v)); }

}  // namespace burstfuse
