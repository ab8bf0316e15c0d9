#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fontnet/rng.hpp"
#include "fontnet/tensor.hpp"

namespace fontnet::nn {

// A learnable tensor with its gradient accumulator and Adam moments.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;

    explicit Param(std::vector<int> shape = {})
        : value(shape), grad(shape), m(shape), v(shape) {}

    void reshape(std::vector<int> shape) {
        value = Tensor(shape);
        grad = Tensor(shape);
        m = Tensor(shape);
        v = Tensor(shape);
    }
};

using ParamList = std::vector<std::pair<std::string, Param*>>;

// --- convolution -----------------------------------------------------------

// 2-D convolution over a single CHW image. Weights are stored as a
// (out_ch, in_ch*k*k) matrix so forward/backward reduce to GEMMs over an
// im2col buffer.
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
    Param weight;
    Param bias;

    Conv2d() = default;
    Conv2d(int in, int out, int k, int s, int p);

    void init(Rng& rng);

    int out_dim(int in_dim) const { return (in_dim + 2 * pad - ksize) / stride + 1; }

    // col, when given, receives the im2col buffer required by backward.
    Tensor forward(const Tensor& x, Tensor* col = nullptr, bool use_bias = true) const;

    // Returns dL/dx; accumulates weight/bias grads unless acc_param_grads is
    // false (used when the discriminator is frozen during the G step, and by
    // the R1 first backward whose param grads are not part of the penalty).
    Tensor backward(const std::vector<int>& x_shape, const Tensor& col, const Tensor& dy,
                    bool acc_param_grads = true, bool acc_bias_grad = true);

    ParamList params(const std::string& prefix);
};

// --- linear ----------------------------------------------------------------

struct Linear {
    int in_dim = 0, out_dim = 0;
    Param weight;  // (out, in) row-major
    Param bias;

    Linear() = default;
    Linear(int in, int out);

    void init(Rng& rng, double scale = 1.0);

    Tensor forward(const Tensor& x, bool use_bias = true) const;
    Tensor backward(const Tensor& x, const Tensor& dy, bool acc_param_grads = true,
                    bool acc_bias_grad = true);

    ParamList params(const std::string& prefix);
};

// --- pointwise / shape ops --------------------------------------------------

Tensor leaky_relu(const Tensor& z, double slope);
// dz given the pre-activation z (the mask is recomputed from z)
Tensor leaky_relu_backward(const Tensor& z, const Tensor& dy, double slope);

Tensor tanh_forward(const Tensor& z);
// dz given the *output* y = tanh(z)
Tensor tanh_backward(const Tensor& y, const Tensor& dy);

Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& dy);

Tensor global_avg_pool(const Tensor& x);                           // CHW -> C
Tensor global_avg_pool_backward(const std::vector<int>& x_shape, const Tensor& dy);

// --- adaptive instance normalization ----------------------------------------

struct AdainCache {
    Tensor mu;     // per-channel spatial mean
    Tensor sigma;  // per-channel spatial std (population)
};

// out_c = scale_c * (x_c - mu_c) / (sigma_c + eps) + bias_c
Tensor adain(const Tensor& x, const Tensor& scale, const Tensor& bias, double eps,
             AdainCache* cache = nullptr);

struct AdainGrads {
    Tensor dx;
    Tensor dscale;
    Tensor dbias;
};

AdainGrads adain_backward(const Tensor& x, const Tensor& scale, const AdainCache& cache,
                          double eps, const Tensor& dy);

// --- optimizer ---------------------------------------------------------------

struct Adam {
    double lr = 2e-4;
    double beta1 = 0.0;
    double beta2 = 0.99;
    double eps = 1e-8;
    long step_count = 0;

    void step(const ParamList& params);
    static void zero_grad(const ParamList& params);
};

}  // namespace fontnet::nn
