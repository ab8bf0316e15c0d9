#pragma once

#include <algorithm>
#include <vector>

#include "fontnet/errors.hpp"

namespace fontnet {

// Shared architecture hyperparameters. Stage counts follow the spatial
// schedule: stride-2 stages from the input resolution down to 4x4.
struct NetConfig {
    int resolution = 128;
    int embedding_dim = 128;  // d: metric-space embedding f(x)
    int style_dim = 256;      // s: intermediate style feature x^s
    int base_channels = 32;
    int max_channels = 512;
    int n_fonts = 0;  // discriminator style head size
    int n_chars = 0;  // discriminator content head size
    double lrelu_slope = 0.2;
    double adain_eps = 1e-5;

    int num_stages() const {
        int r = resolution, n = 0;
        while (r > 4) {
            if (r % 2 != 0) throw ParamOutOfRange("resolution must be a power of two >= 8");
            r /= 2;
            ++n;
        }
        if (r != 4) throw ParamOutOfRange("resolution must be a power of two >= 8");
        return n;
    }

    int stage_channels(int stage) const {
        return std::min(max_channels, base_channels << stage);
    }

    int content_channels() const { return stage_channels(num_stages() - 1); }
};

}  // namespace fontnet
