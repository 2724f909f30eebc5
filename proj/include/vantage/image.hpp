#pragma once

#include <cstdint>
#include <vector>

#include "vantage/error.hpp"

namespace vantage {

/// Row-major RGB image, channel values in [0, 1].
struct ImageRGB {
    int height = 0;
    int width = 0;
    std::vector<float> data; // height * width * 3

    ImageRGB() = default;
    ImageRGB(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0.0f) {}

    static ImageRGB filled(int h, int w, float r, float g, float b) {
        ImageRGB img(h, w);
        for (size_t i = 0; i < img.data.size(); i += 3) {
            img.data[i] = r;
            img.data[i + 1] = g;
            img.data[i + 2] = b;
        }
        return img;
    }

    float* px(int r, int c) { return data.data() + (static_cast<size_t>(r) * width + c) * 3; }
    const float* px(int r, int c) const {
        return data.data() + (static_cast<size_t>(r) * width + c) * 3;
    }

    bool empty() const { return height == 0 || width == 0; }
};

/// Depth image in meters; kNoHit marks pixels with no surface.
struct ImageDepth {
    static constexpr float kNoHit = -1.0f;

    int height = 0;
    int width = 0;
    std::vector<float> data; // height * width

    ImageDepth() = default;
    ImageDepth(int h, int w)
        : height(h), width(w), data(static_cast<size_t>(h) * w, kNoHit) {}

    float& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

/// Single-channel float image (alpha/weight maps).
struct ImageGray {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    ImageGray() = default;
    ImageGray(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0f) {}

    float& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

/// Binary mask.
struct ImageMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    ImageMask() = default;
    ImageMask(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0) {}

    std::uint8_t& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    std::uint8_t at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }

    int count() const {
        int n = 0;
        for (auto v : data) n += v ? 1 : 0;
        return n;
    }
};

/// Bilinear resize with half-pixel centers and edge clamping.
ImageRGB resize_bilinear(const ImageRGB& src, int out_height, int out_width);
ImageGray resize_bilinear(const ImageGray& src, int out_height, int out_width);

/// Threshold a weight map into a mask (value >= threshold).
ImageMask threshold_mask(const ImageGray& weights, float threshold);

/// Rec.601 luma.
inline float luminance(const float* rgb) {
    return 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
}

} // namespace vantage
