#pragma once

#include <vector>

#include "fontnet/net_config.hpp"
#include "fontnet/nn.hpp"
#include "fontnet/tensor.hpp"

namespace fontnet {

// The style separator S_E: a stride-2 conv tower ending in a global average
// pool. The pooled activation is the style feature x^s fed to the generator's
// AdaIN layers; a linear head plus L2 normalization produces the metric-space
// style embedding f(x).
class Separator {
public:
    struct Output {
        Tensor embedding;  // unit-norm, embedding_dim
        Tensor feature;    // style_dim
    };

    struct Context {
        std::vector<Tensor> inputs;  // conv input at each stage
        std::vector<Tensor> cols;
        std::vector<Tensor> zs;  // pre-activations
        Tensor trunk_out;        // post-activation at 4x4
        Tensor feature;
        Tensor embedding_raw;  // head output before normalization
    };

    explicit Separator(const NetConfig& cfg);

    void init(Rng& rng);

    Output forward(const Tensor& image, Context* ctx = nullptr) const;

    // Backpropagates gradients on both outputs; returns dL/d(image).
    // Either gradient tensor may be empty to mean zero.
    Tensor backward(const Context& ctx, const Tensor& d_embedding, const Tensor& d_feature,
                    bool acc_param_grads = true);

    nn::ParamList params(const std::string& prefix = "separator");

    const NetConfig& config() const { return cfg_; }

private:
    NetConfig cfg_;
    std::vector<nn::Conv2d> convs_;
    nn::Linear head_;
};

// Elementwise arithmetic mean of style features.
Tensor mean_style_feature(const std::vector<Tensor>& features);

}  // namespace fontnet
