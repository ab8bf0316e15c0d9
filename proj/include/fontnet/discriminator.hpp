#pragma once

#include <utility>
#include <vector>

#include "fontnet/net_config.hpp"
#include "fontnet/nn.hpp"
#include "fontnet/tensor.hpp"

namespace fontnet {

// One real/fake logit per style class and one per content class; only the
// true-class logits enter the adversarial losses.
struct MultiTaskLogits {
    Tensor style_logits;    // |train_fonts|
    Tensor content_logits;  // |train_chars|
};

std::pair<double, double> select_logits(const MultiTaskLogits& logits, int font_id, int char_id);

// Shared conv trunk (stride-2 stages to 4x4, leaky-relu) + two linear heads.
// The trunk is piecewise-linear, which keeps the R1 penalty's parameter
// gradient exact: the input-gradient of D is computed by one backward pass,
// and its dependence on the weights is captured by reverse-mode over the
// tangent (JVP) network with activation masks frozen from the primal pass.
class Discriminator {
public:
    struct Context {
        std::vector<Tensor> inputs;
        std::vector<Tensor> cols;
        std::vector<Tensor> zs;
        Tensor flat;  // flattened trunk output fed to the heads
    };

    explicit Discriminator(const NetConfig& cfg);

    void init(Rng& rng);

    MultiTaskLogits discriminate(const Tensor& image, Context* ctx = nullptr) const;

    // Backpropagates head-logit gradients; returns dL/d(image).
    Tensor backward(const Context& ctx, const Tensor& dstyle_logits,
                    const Tensor& dcontent_logits, bool acc_param_grads = true);

    // R1 penalty gamma/2 * ||grad_x [D_style(x)_font + D_content(x)_char]||^2
    // on a real image. Returns the penalty value and accumulates its exact
    // parameter gradient.
    double r1_penalty(const Tensor& image, int font_id, int char_id, double gamma);

    nn::ParamList params(const std::string& prefix = "discriminator");

    const NetConfig& config() const { return cfg_; }

private:
    NetConfig cfg_;
    std::vector<nn::Conv2d> convs_;
    nn::Linear style_head_;
    nn::Linear content_head_;
};

}  // namespace fontnet
