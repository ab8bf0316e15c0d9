#pragma once

#include "fontnet/tensor.hpp"

namespace fontnet {

// Single-channel glyph raster. Storage convention: values in [0,1] with
// 1.0 = background, 0.0 = full ink. Models operate on [-1,1]; conversion
// happens only at the model boundary.
struct GlyphImage {
    Tensor pixels;  // (H, W)
    int font_id = -1;
    int char_id = -1;

    int resolution() const { return pixels.empty() ? 0 : pixels.shape[0]; }
};

// [0,1] storage -> [-1,1] model space, as a 1xHxW tensor
inline Tensor to_model_space(const Tensor& pixels) {
    Tensor t({1, pixels.shape[0], pixels.shape[1]});
    for (std::size_t i = 0; i < pixels.size(); ++i) t[i] = 2.0 * pixels[i] - 1.0;
    return t;
}

inline Tensor to_model_space(const GlyphImage& img) { return to_model_space(img.pixels); }

// [-1,1] model space (1xHxW or HxW) -> [0,1] storage
inline Tensor from_model_space(const Tensor& t) {
    const int h = t.shape[t.shape.size() - 2];
    const int w = t.shape[t.shape.size() - 1];
    Tensor pixels({h, w});
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        double x = 0.5 * (t[i] + 1.0);
        pixels[i] = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
    }
    return pixels;
}

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
    if (!same_shape(a, b)) throw ShapeMismatch("mean_abs_diff shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace fontnet
