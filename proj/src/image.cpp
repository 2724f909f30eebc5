#include "vantage/image.hpp"

#include <algorithm>
#include <cmath>

namespace vantage {

namespace {

struct Tap {
    int lo;
    int hi;
    float w_hi;
};

// Source taps for one output coordinate, half-pixel-center convention.
std::vector<Tap> make_taps(int src_n, int out_n) {
    std::vector<Tap> taps(static_cast<size_t>(out_n));
    const double scale = static_cast<double>(src_n) / out_n;
    for (int i = 0; i < out_n; ++i) {
        const double s = (i + 0.5) * scale - 0.5;
        const double floor_s = std::floor(s);
        int lo = static_cast<int>(floor_s);
        float w = static_cast<float>(s - floor_s);
        int hi = lo + 1;
        lo = std::clamp(lo, 0, src_n - 1);
        hi = std::clamp(hi, 0, src_n - 1);
        taps[static_cast<size_t>(i)] = {lo, hi, w};
    }
    return taps;
}

} // namespace

ImageRGB resize_bilinear(const ImageRGB& src, int out_height, int out_width) {
    if (src.empty() || out_height <= 0 || out_width <= 0) {
        throw ConfigError("resize_bilinear: empty image or non-positive output size");
    }
    if (src.height == out_height && src.width == out_width) return src;
    ImageRGB out(out_height, out_width);
    const auto row_taps = make_taps(src.height, out_height);
    const auto col_taps = make_taps(src.width, out_width);
    for (int r = 0; r < out_height; ++r) {
        const Tap& tr = row_taps[static_cast<size_t>(r)];
        for (int c = 0; c < out_width; ++c) {
            const Tap& tc = col_taps[static_cast<size_t>(c)];
            const float* p00 = src.px(tr.lo, tc.lo);
            const float* p01 = src.px(tr.lo, tc.hi);
            const float* p10 = src.px(tr.hi, tc.lo);
            const float* p11 = src.px(tr.hi, tc.hi);
            float* o = out.px(r, c);
            for (int ch = 0; ch < 3; ++ch) {
                const float top = p00[ch] + (p01[ch] - p00[ch]) * tc.w_hi;
                const float bot = p10[ch] + (p11[ch] - p10[ch]) * tc.w_hi;
                o[ch] = top + (bot - top) * tr.w_hi;
            }
        }
    }
    return out;
}

ImageGray resize_bilinear(const ImageGray& src, int out_height, int out_width) {
    if (src.height <= 0 || src.width <= 0 || out_height <= 0 || out_width <= 0) {
        throw ConfigError("resize_bilinear: empty image or non-positive output size");
    }
    if (src.height == out_height && src.width == out_width) return src;
    ImageGray out(out_height, out_width);
    const auto row_taps = make_taps(src.height, out_height);
    const auto col_taps = make_taps(src.width, out_width);
    for (int r = 0; r < out_height; ++r) {
        const Tap& tr = row_taps[static_cast<size_t>(r)];
        for (int c = 0; c < out_width; ++c) {
            const Tap& tc = col_taps[static_cast<size_t>(c)];
            const float top =
                src.at(tr.lo, tc.lo) + (src.at(tr.lo, tc.hi) - src.at(tr.lo, tc.lo)) * tc.w_hi;
            const float bot =
                src.at(tr.hi, tc.lo) + (src.at(tr.hi, tc.hi) - src.at(tr.hi, tc.lo)) * tc.w_hi;
            out.at(r, c) = top + (bot - top) * tr.w_hi;
        }
    }
    return out;
}

ImageMask threshold_mask(const ImageGray& weights, float threshold) {
    ImageMask mask(weights.height, weights.width);
    for (size_t i = 0; i < weights.data.size(); ++i) {
        mask.data[i] = weights.data[i] >= threshold ? 1 : 0;
    }
    return mask;
}

} // namespace vantage
