#include "fontnet/nn.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace fontnet::nn {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// --- convolution -----------------------------------------------------------

Conv2d::Conv2d(int in, int out, int k, int s, int p)
    : in_ch(in), out_ch(out), ksize(k), stride(s), pad(p) {
    weight.reshape({out_ch, in_ch * ksize * ksize});
    bias.reshape({out_ch});
}

void Conv2d::init(Rng& rng) {
    const double std = std::sqrt(2.0 / (in_ch * ksize * ksize));
    for (double& w : weight.value.v) w = rng.normal() * std;
    bias.value.zero();
}

static Tensor im2col(const Tensor& x, int ksize, int stride, int pad, int oh, int ow) {
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor col({C * ksize * ksize, oh * ow});
    std::size_t r = 0;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < ksize; ++ky)
            for (int kx = 0; kx < ksize; ++kx) {
                double* row = &col.v[r * static_cast<std::size_t>(oh) * ow];
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        row[oy * ow + ox] = (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                                ? x.at(c, iy, ix)
                                                : 0.0;
                    }
                }
                ++r;
            }
    return col;
}

static void col2im(const Tensor& dcol, std::vector<int> x_shape, int ksize, int stride, int pad,
                   int oh, int ow, Tensor& dx) {
    const int C = x_shape[0], H = x_shape[1], W = x_shape[2];
    std::size_t r = 0;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < ksize; ++ky)
            for (int kx = 0; kx < ksize; ++kx) {
                const double* row = &dcol.v[r * static_cast<std::size_t>(oh) * ow];
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < W) dx.at(c, iy, ix) += row[oy * ow + ox];
                    }
                }
                ++r;
            }
}

Tensor Conv2d::forward(const Tensor& x, Tensor* col_out, bool use_bias) const {
    if (x.shape.size() != 3 || x.shape[0] != in_ch)
        throw ShapeMismatch("conv input channels mismatch");
    const int oh = out_dim(x.shape[1]), ow = out_dim(x.shape[2]);
    Tensor col = im2col(x, ksize, stride, pad, oh, ow);

    Tensor y({out_ch, oh, ow});
    ConstMapRM w(weight.value.v.data(), out_ch, in_ch * ksize * ksize);
    ConstMapRM c(col.v.data(), in_ch * ksize * ksize, oh * ow);
    MapRM out(y.v.data(), out_ch, oh * ow);
    out.noalias() = w * c;
    if (use_bias)
        for (int o = 0; o < out_ch; ++o) out.row(o).array() += bias.value[o];

    if (col_out) *col_out = std::move(col);
    return y;
}

Tensor Conv2d::backward(const std::vector<int>& x_shape, const Tensor& col, const Tensor& dy,
                        bool acc_param_grads, bool acc_bias_grad) {
    const int oh = dy.shape[1], ow = dy.shape[2];
    ConstMapRM dy_m(dy.v.data(), out_ch, oh * ow);
    ConstMapRM col_m(col.v.data(), in_ch * ksize * ksize, oh * ow);

    if (acc_param_grads) {
        MapRM gw(weight.grad.v.data(), out_ch, in_ch * ksize * ksize);
        gw.noalias() += dy_m * col_m.transpose();
        if (acc_bias_grad)
            for (int o = 0; o < out_ch; ++o) bias.grad[o] += dy_m.row(o).sum();
    }

    Tensor dcol({in_ch * ksize * ksize, oh * ow});
    MapRM dcol_m(dcol.v.data(), in_ch * ksize * ksize, oh * ow);
    ConstMapRM w(weight.value.v.data(), out_ch, in_ch * ksize * ksize);
    dcol_m.noalias() = w.transpose() * dy_m;

    Tensor dx(x_shape);
    col2im(dcol, x_shape, ksize, stride, pad, oh, ow, dx);
    return dx;
}

ParamList Conv2d::params(const std::string& prefix) {
    return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

// --- linear ----------------------------------------------------------------

Linear::Linear(int in, int out) : in_dim(in), out_dim(out) {
    weight.reshape({out_dim, in_dim});
    bias.reshape({out_dim});
}

void Linear::init(Rng& rng, double scale) {
    const double std = scale * std::sqrt(1.0 / in_dim);
    for (double& w : weight.value.v) w = rng.normal() * std;
    bias.value.zero();
}

Tensor Linear::forward(const Tensor& x, bool use_bias) const {
    if (static_cast<int>(x.size()) != in_dim) throw ShapeMismatch("linear input dim mismatch");
    Tensor y({out_dim});
    ConstMapRM w(weight.value.v.data(), out_dim, in_dim);
    Eigen::Map<const Eigen::VectorXd> xv(x.v.data(), in_dim);
    Eigen::Map<Eigen::VectorXd> yv(y.v.data(), out_dim);
    yv.noalias() = w * xv;
    if (use_bias)
        for (int o = 0; o < out_dim; ++o) y[o] += bias.value[o];
    return y;
}

Tensor Linear::backward(const Tensor& x, const Tensor& dy, bool acc_param_grads,
                        bool acc_bias_grad) {
    if (acc_param_grads) {
        MapRM gw(weight.grad.v.data(), out_dim, in_dim);
        Eigen::Map<const Eigen::VectorXd> dyv(dy.v.data(), out_dim);
        Eigen::Map<const Eigen::VectorXd> xv(x.v.data(), in_dim);
        gw.noalias() += dyv * xv.transpose();
        if (acc_bias_grad)
            for (int o = 0; o < out_dim; ++o) bias.grad[o] += dy[o];
    }
    Tensor dx(x.shape);
    ConstMapRM w(weight.value.v.data(), out_dim, in_dim);
    Eigen::Map<const Eigen::VectorXd> dyv(dy.v.data(), out_dim);
    Eigen::Map<Eigen::VectorXd> dxv(dx.v.data(), in_dim);
    dxv.noalias() = w.transpose() * dyv;
    return dx;
}

ParamList Linear::params(const std::string& prefix) {
    return {{prefix + ".weight", &weight}, {prefix + ".bias", &bias}};
}

// --- pointwise / shape ops ---------------------------------------------------

Tensor leaky_relu(const Tensor& z, double slope) {
    Tensor y = z;
    for (double& x : y.v)
        if (x < 0.0) x *= slope;
    return y;
}

Tensor leaky_relu_backward(const Tensor& z, const Tensor& dy, double slope) {
    Tensor dz = dy;
    for (std::size_t i = 0; i < dz.size(); ++i)
        if (z[i] < 0.0) dz[i] *= slope;
    return dz;
}

Tensor tanh_forward(const Tensor& z) {
    Tensor y = z;
    for (double& x : y.v) x = std::tanh(x);
    return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& dy) {
    Tensor dz = dy;
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - y[i] * y[i];
    return dz;
}

Tensor upsample2x(const Tensor& x) {
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor y({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < 2 * H; ++i)
            for (int j = 0; j < 2 * W; ++j) y.at(c, i, j) = x.at(c, i / 2, j / 2);
    return y;
}

Tensor upsample2x_backward(const Tensor& dy) {
    const int C = dy.shape[0], H = dy.shape[1] / 2, W = dy.shape[2] / 2;
    Tensor dx({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < 2 * H; ++i)
            for (int j = 0; j < 2 * W; ++j) dx.at(c, i / 2, j / 2) += dy.at(c, i, j);
    return dx;
}

Tensor global_avg_pool(const Tensor& x) {
    const int C = x.shape[0];
    const int n = x.shape[1] * x.shape[2];
    Tensor y({C});
    for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += x.v[static_cast<std::size_t>(c) * n + i];
        y[c] = s / n;
    }
    return y;
}

Tensor global_avg_pool_backward(const std::vector<int>& x_shape, const Tensor& dy) {
    const int C = x_shape[0];
    const int n = x_shape[1] * x_shape[2];
    Tensor dx(x_shape);
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < n; ++i) dx.v[static_cast<std::size_t>(c) * n + i] = dy[c] / n;
    return dx;
}

// --- adaptive instance normalization ----------------------------------------

Tensor adain(const Tensor& x, const Tensor& scale, const Tensor& bias, double eps,
             AdainCache* cache) {
    const int C = x.shape[0];
    if (static_cast<int>(scale.size()) != C || static_cast<int>(bias.size()) != C)
        throw ChannelMismatch("adain scale/bias channel count mismatch");
    if (eps <= 0.0) throw ParamOutOfRange("adain eps must be positive");
    const int n = x.shape[1] * x.shape[2];

    Tensor mu({C}), sigma({C});
    for (int c = 0; c < C; ++c) {
        const double* xc = &x.v[static_cast<std::size_t>(c) * n];
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += xc[i];
        mu[c] = s / n;
        double ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = xc[i] - mu[c];
            ss += d * d;
        }
        sigma[c] = std::sqrt(ss / n);
    }

    Tensor y(x.shape);
    for (int c = 0; c < C; ++c) {
        const double* xc = &x.v[static_cast<std::size_t>(c) * n];
        double* yc = &y.v[static_cast<std::size_t>(c) * n];
        const double inv = 1.0 / (sigma[c] + eps);
        for (int i = 0; i < n; ++i) yc[i] = scale[c] * (xc[i] - mu[c]) * inv + bias[c];
    }

    if (cache) {
        cache->mu = std::move(mu);
        cache->sigma = std::move(sigma);
    }
    return y;
}

AdainGrads adain_backward(const Tensor& x, const Tensor& scale, const AdainCache& cache,
                          double eps, const Tensor& dy) {
    const int C = x.shape[0];
    const int n = x.shape[1] * x.shape[2];
    AdainGrads g;
    g.dx = Tensor(x.shape);
    g.dscale = Tensor({C});
    g.dbias = Tensor({C});

    for (int c = 0; c < C; ++c) {
        const double* xc = &x.v[static_cast<std::size_t>(c) * n];
        const double* dyc = &dy.v[static_cast<std::size_t>(c) * n];
        double* dxc = &g.dx.v[static_cast<std::size_t>(c) * n];
        const double mu = cache.mu[c];
        const double sigma = cache.sigma[c];
        const double inv = 1.0 / (sigma + eps);

        // dn = dy * scale; n = (x - mu) / (sigma + eps)
        double sum_dn = 0.0, sum_dn_xm = 0.0, sum_dy = 0.0, sum_dy_n = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dn = dyc[i] * scale[c];
            const double xm = xc[i] - mu;
            sum_dn += dn;
            sum_dn_xm += dn * xm;
            sum_dy += dyc[i];
            sum_dy_n += dyc[i] * xm * inv;
        }
        g.dbias[c] = sum_dy;
        g.dscale[c] = sum_dy_n;

        // dsigma/dx_i = (x_i - mu) / (n * sigma); the sigma term vanishes for
        // a constant channel (x - mu == 0)
        const double sig_coef = sigma > 0.0 ? sum_dn_xm * inv * inv / (n * sigma) : 0.0;
        for (int i = 0; i < n; ++i) {
            const double dn = dyc[i] * scale[c];
            dxc[i] = (dn - sum_dn / n) * inv - (xc[i] - mu) * sig_coef;
        }
    }
    return g;
}

// --- optimizer ---------------------------------------------------------------

void Adam::step(const ParamList& params) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (auto& [name, p] : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad[i];
            p->m[i] = beta1 * p->m[i] + (1.0 - beta1) * g;
            p->v[i] = beta2 * p->v[i] + (1.0 - beta2) * g * g;
            const double mhat = p->m[i] / bc1;
            const double vhat = p->v[i] / bc2;
            p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void Adam::zero_grad(const ParamList& params) {
    for (auto& [name, p] : params) p->grad.zero();
}

}  // namespace fontnet::nn
