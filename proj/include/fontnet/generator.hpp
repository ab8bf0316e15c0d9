#pragma once

#include <vector>

#include "fontnet/net_config.hpp"
#include "fontnet/nn.hpp"
#include "fontnet/separator.hpp"
#include "fontnet/tensor.hpp"

namespace fontnet {

// Per-decoder-layer AdaIN modulation: one scale and bias per channel.
struct AdaINParams {
    Tensor scale;
    Tensor bias;
};

// Content encoder G_E plus the StyleGAN-style AdaIN decoder G_D. The decoder has
// no mapping network and no learned constant input: the content feature map
// replaces the constant, and style enters exclusively through per-layer
// affines that map x^s to AdaIN parameters.
class Generator {
public:
    struct EncodeContext {
        std::vector<Tensor> inputs;
        std::vector<Tensor> cols;
        std::vector<Tensor> zs;
    };

    struct DecodeContext {
        std::vector<Tensor> ups;     // upsampled conv inputs
        std::vector<Tensor> cols;
        std::vector<Tensor> zs;      // conv outputs (adain inputs)
        std::vector<nn::AdainCache> adain_caches;
        std::vector<Tensor> as;      // adain outputs (pre-lrelu)
        Tensor out_col;
        Tensor out_input;            // input to the final conv
        Tensor y;                    // tanh output
    };

    struct DecodeGrads {
        Tensor dcontent;
        std::vector<AdaINParams> daffines;
    };

    explicit Generator(const NetConfig& cfg);

    void init(Rng& rng);

    int decoder_layer_count() const { return static_cast<int>(dec_convs_.size()); }
    int decoder_layer_channels(int layer) const { return dec_convs_[layer].out_ch; }

    Tensor encode_content(const Tensor& source, EncodeContext* ctx = nullptr) const;
    Tensor encode_content_backward(const EncodeContext& ctx, const Tensor& dcontent,
                                   bool acc_param_grads = true);

    // One AdaINParams per decoder layer. Scale is 1 + raw affine output so
    // zero-initialized affines start at identity modulation.
    std::vector<AdaINParams> style_affines(const Tensor& style_feature) const;
    // daffines -> dL/d(style_feature)
    Tensor style_affines_backward(const Tensor& style_feature,
                                  const std::vector<AdaINParams>& daffines,
                                  bool acc_param_grads = true);

    // content (C x 4 x 4) -> raster (1 x res x res) in [-1,1]
    Tensor decode(const Tensor& content, const std::vector<AdaINParams>& affines,
                  DecodeContext* ctx = nullptr) const;
    DecodeGrads decode_backward(const DecodeContext& ctx, const std::vector<AdaINParams>& affines,
                                const Tensor& dy, bool acc_param_grads = true);

    // Full pipeline: mean reference style feature -> affines -> decode.
    Tensor synthesize(const Tensor& source, const std::vector<Tensor>& references,
                      const Separator& separator) const;

    nn::ParamList encoder_params(const std::string& prefix = "generator_encoder");
    nn::ParamList decoder_params(const std::string& prefix = "generator_decoder");
    nn::ParamList affine_params(const std::string& prefix = "style_affines");

    const NetConfig& config() const { return cfg_; }

private:
    NetConfig cfg_;
    std::vector<nn::Conv2d> enc_convs_;
    std::vector<nn::Linear> affines_;    // style_dim -> 2 * layer channels
    std::vector<nn::Conv2d> dec_convs_;
    nn::Conv2d out_conv_;
};

// Ablation decoder ("w/o our G_D"): the style feature is tiled and
// concatenated onto the content map at the bottleneck, then plain
// upsample+conv stages follow. No AdaIN, no per-layer affines.
class PlainDecoder {
public:
    struct Context {
        Tensor fused_input;  // content ++ tiled style
        std::vector<Tensor> ups;
        std::vector<Tensor> cols;
        std::vector<Tensor> zs;
        Tensor fuse_col;
        Tensor fuse_z;
        Tensor out_col;
        Tensor out_input;
        Tensor y;
    };

    struct Grads {
        Tensor dcontent;
        Tensor dstyle_feature;
    };

    explicit PlainDecoder(const NetConfig& cfg);

    void init(Rng& rng);

    Tensor decode(const Tensor& content, const Tensor& style_feature,
                  Context* ctx = nullptr) const;
    Grads decode_backward(const Context& ctx, const Tensor& dy, bool acc_param_grads = true);

    nn::ParamList params(const std::string& prefix = "plain_decoder");

private:
    NetConfig cfg_;
    nn::Conv2d fuse_conv_;  // (content_ch + style_dim) -> content_ch, 1x1
    std::vector<nn::Conv2d> dec_convs_;
    nn::Conv2d out_conv_;
};

}  // namespace fontnet
