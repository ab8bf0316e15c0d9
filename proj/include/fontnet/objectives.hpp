#pragma once

#include <string>

#include "fontnet/tensor.hpp"

namespace fontnet {

struct LossWeights {
    double lambda_l1 = 1.0;
    double lambda_gstyle = 1.0;
    double lambda_encstyle = 1.0;

    void validate() const {
        if (!(lambda_l1 >= 0.0 && lambda_gstyle >= 0.0 && lambda_encstyle >= 0.0) ||
            !std::isfinite(lambda_l1) || !std::isfinite(lambda_gstyle) ||
            !std::isfinite(lambda_encstyle))
            throw ParamOutOfRange("loss weights must be finite and >= 0");
    }
};

struct Margin {
    double alpha = 0.2;

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw ParamOutOfRange("margin alpha must be positive and finite");
    }
};

struct LossReport {
    double adv_d = 0.0;
    double adv_g = 0.0;
    double l1 = 0.0;
    double g_style = 0.0;
    double enc_style = 0.0;
    double total_g = 0.0;

    bool all_finite() const {
        return std::isfinite(adv_d) && std::isfinite(adv_g) && std::isfinite(l1) &&
               std::isfinite(g_style) && std::isfinite(enc_style) && std::isfinite(total_g);
    }

    std::string to_json_line(long step) const;
};

// Hinge-clamped triplet loss: max(0, ||fa-fp||^2 - ||fa-fn||^2 + alpha).
double triplet_loss(const Tensor& fa, const Tensor& fp, const Tensor& fn, double alpha);

struct TripletGrads {
    double loss = 0.0;
    Tensor dfa, dfp, dfn;
};
TripletGrads triplet_loss_grad(const Tensor& fa, const Tensor& fp, const Tensor& fn, double alpha);

// Same kernel; the anchor is the embedding of a generated image, so its
// gradient flows into the generator.
inline double gen_style_triplet_loss(const Tensor& fy, const Tensor& fp, const Tensor& fn,
                                     double alpha) {
    return triplet_loss(fy, fp, fn, alpha);
}
inline TripletGrads gen_style_triplet_loss_grad(const Tensor& fy, const Tensor& fp,
                                                const Tensor& fn, double alpha) {
    return triplet_loss_grad(fy, fp, fn, alpha);
}

struct AdvLosses {
    double d_loss = 0.0;  // -[log p_real + log(1 - p_fake)]
    double g_loss = 0.0;  // -log p_fake (non-saturating)
    // gradients of the respective losses w.r.t. the logits
    double dd_dreal = 0.0;
    double dd_dfake = 0.0;
    double dg_dfake = 0.0;
};

AdvLosses adv_losses(double real_logit, double fake_logit);

double l1_loss(const Tensor& gt, const Tensor& y);
// loss plus dL/dy
std::pair<double, Tensor> l1_loss_grad(const Tensor& gt, const Tensor& y);

double total_generator_objective(double adv_g, double l1, double g_style, double enc_style,
                                 const LossWeights& w);

}  // namespace fontnet
