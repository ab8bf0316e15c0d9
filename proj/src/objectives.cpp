#include "fontnet/objectives.hpp"

#include <cmath>
#include <sstream>

namespace fontnet {

std::string LossReport::to_json_line(long step) const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"step\":" << step << ",\"adv_d\":" << adv_d << ",\"adv_g\":" << adv_g
       << ",\"l1\":" << l1 << ",\"g_style\":" << g_style << ",\"enc_style\":" << enc_style
       << ",\"total_g\":" << total_g << "}";
    return os.str();
}

namespace {

double sq_dist(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimMismatch("embedding dims differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double softplus(double x) {
    // log(1 + e^x), overflow-safe
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double triplet_loss(const Tensor& fa, const Tensor& fp, const Tensor& fn, double alpha) {
    Margin{alpha}.validate();
    const double raw = sq_dist(fa, fp) - sq_dist(fa, fn) + alpha;
    return raw > 0.0 ? raw : 0.0;
}

TripletGrads triplet_loss_grad(const Tensor& fa, const Tensor& fp, const Tensor& fn,
                               double alpha) {
    TripletGrads g;
    g.loss = triplet_loss(fa, fp, fn, alpha);
    g.dfa = Tensor(fa.shape);
    g.dfp = Tensor(fp.shape);
    g.dfn = Tensor(fn.shape);
    if (g.loss > 0.0) {
        for (std::size_t i = 0; i < fa.size(); ++i) {
            g.dfa[i] = 2.0 * (fn[i] - fp[i]);
            g.dfp[i] = -2.0 * (fa[i] - fp[i]);
            g.dfn[i] = 2.0 * (fa[i] - fn[i]);
        }
    }
    return g;
}

AdvLosses adv_losses(double real_logit, double fake_logit) {
    if (!std::isfinite(real_logit) || !std::isfinite(fake_logit))
        throw NonFinite("adv_losses requires finite logits");
    AdvLosses r;
    r.d_loss = softplus(-real_logit) + softplus(fake_logit);
    r.g_loss = softplus(-fake_logit);
    r.dd_dreal = sigmoid(real_logit) - 1.0;
    r.dd_dfake = sigmoid(fake_logit);
    r.dg_dfake = sigmoid(fake_logit) - 1.0;
    return r;
}

double l1_loss(const Tensor& gt, const Tensor& y) {
    if (!same_shape(gt, y)) throw ShapeMismatch("l1_loss shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) s += std::abs(gt[i] - y[i]);
    return s / static_cast<double>(gt.size());
}

std::pair<double, Tensor> l1_loss_grad(const Tensor& gt, const Tensor& y) {
    if (!same_shape(gt, y)) throw ShapeMismatch("l1_loss shape mismatch");
    Tensor dy(y.shape);
    double s = 0.0;
    const double inv_n = 1.0 / static_cast<double>(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double d = y[i] - gt[i];
        s += std::abs(d);
        dy[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
    }
    return {s * inv_n, std::move(dy)};
}

double total_generator_objective(double adv_g, double l1, double g_style, double enc_style,
                                 const LossWeights& w) {
    w.validate();
    if (!std::isfinite(adv_g) || !std::isfinite(l1) || !std::isfinite(g_style) ||
        !std::isfinite(enc_style))
        throw NonFinite("total_generator_objective requires finite terms");
    return adv_g + w.lambda_l1 * l1 + w.lambda_gstyle * g_style + w.lambda_encstyle * enc_style;
}

}  // namespace fontnet
