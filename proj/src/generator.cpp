#include "fontnet/generator.hpp"

namespace fontnet {

namespace {

// decoder channel at position i (i = 0 is the content map)
int decoder_channels(const NetConfig& cfg, int i) {
    const int stages = cfg.num_stages();
    if (i >= stages) return cfg.base_channels;
    return std::min(cfg.max_channels, cfg.base_channels << (stages - 1 - i));
}

}  // namespace

Generator::Generator(const NetConfig& cfg) : cfg_(cfg) {
    const int stages = cfg_.num_stages();
    int in_ch = 1;
    for (int i = 0; i < stages; ++i) {
        enc_convs_.emplace_back(in_ch, cfg_.stage_channels(i), 3, 2, 1);
        in_ch = cfg_.stage_channels(i);
    }
    for (int i = 0; i < stages; ++i) {
        const int c_in = decoder_channels(cfg_, i);
        const int c_out = decoder_channels(cfg_, i + 1);
        dec_convs_.emplace_back(c_in, c_out, 3, 1, 1);
        affines_.emplace_back(cfg_.style_dim, 2 * c_out);
    }
    out_conv_ = nn::Conv2d(decoder_channels(cfg_, stages), 1, 3, 1, 1);
}

void Generator::init(Rng& rng) {
    for (auto& c : enc_convs_) c.init(rng);
    for (auto& c : dec_convs_) c.init(rng);
    out_conv_.init(rng);
    // affines start near identity modulation (scale ~= 1, bias ~= 0)
    for (auto& a : affines_) a.init(rng, 0.1);
}

Tensor Generator::encode_content(const Tensor& source, EncodeContext* ctx) const {
    if (source.shape.size() != 3 || source.shape[0] != 1 || source.shape[1] != cfg_.resolution ||
        source.shape[2] != cfg_.resolution)
        throw ShapeMismatch("encoder expects 1x" + std::to_string(cfg_.resolution) + "x" +
                            std::to_string(cfg_.resolution) + " input");
    Tensor x = source;
    for (const auto& conv : enc_convs_) {
        Tensor col;
        Tensor z = conv.forward(x, ctx ? &col : nullptr);
        Tensor a = nn::leaky_relu(z, cfg_.lrelu_slope);
        if (ctx) {
            ctx->inputs.push_back(std::move(x));
            ctx->cols.push_back(std::move(col));
            ctx->zs.push_back(std::move(z));
        }
        x = std::move(a);
    }
    return x;
}

Tensor Generator::encode_content_backward(const EncodeContext& ctx, const Tensor& dcontent,
                                          bool acc_param_grads) {
    Tensor dx = dcontent;
    for (int i = static_cast<int>(enc_convs_.size()) - 1; i >= 0; --i) {
        Tensor dz = nn::leaky_relu_backward(ctx.zs[i], dx, cfg_.lrelu_slope);
        dx = enc_convs_[i].backward(ctx.inputs[i].shape, ctx.cols[i], dz, acc_param_grads);
    }
    return dx;
}

std::vector<AdaINParams> Generator::style_affines(const Tensor& style_feature) const {
    if (static_cast<int>(style_feature.size()) != cfg_.style_dim)
        throw ShapeMismatch("style feature dim mismatch");
    std::vector<AdaINParams> out;
    for (const auto& affine : affines_) {
        Tensor raw = affine.forward(style_feature);
        const int c = affine.out_dim / 2;
        AdaINParams p;
        p.scale = Tensor({c});
        p.bias = Tensor({c});
        for (int i = 0; i < c; ++i) {
            p.scale[i] = 1.0 + raw[i];
            p.bias[i] = raw[c + i];
        }
        out.push_back(std::move(p));
    }
    return out;
}

Tensor Generator::style_affines_backward(const Tensor& style_feature,
                                         const std::vector<AdaINParams>& daffines,
                                         bool acc_param_grads) {
    Tensor dfeat({cfg_.style_dim});
    for (std::size_t l = 0; l < affines_.size(); ++l) {
        const int c = affines_[l].out_dim / 2;
        Tensor draw({2 * c});
        for (int i = 0; i < c; ++i) {
            draw[i] = daffines[l].scale[i];  // d(scale)/d(raw) = 1
            draw[c + i] = daffines[l].bias[i];
        }
        dfeat += affines_[l].backward(style_feature, draw, acc_param_grads);
    }
    return dfeat;
}

Tensor Generator::decode(const Tensor& content, const std::vector<AdaINParams>& affines,
                         DecodeContext* ctx) const {
    if (affines.size() != dec_convs_.size())
        throw ShapeMismatch("affine count != decoder layer count");
    Tensor x = content;
    for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
        Tensor up = nn::upsample2x(x);
        Tensor col;
        Tensor z = dec_convs_[i].forward(up, ctx ? &col : nullptr);
        nn::AdainCache cache;
        Tensor a = nn::adain(z, affines[i].scale, affines[i].bias, cfg_.adain_eps,
                             ctx ? &cache : nullptr);
        Tensor act = nn::leaky_relu(a, cfg_.lrelu_slope);
        if (ctx) {
            ctx->ups.push_back(std::move(up));
            ctx->cols.push_back(std::move(col));
            ctx->zs.push_back(std::move(z));
            ctx->adain_caches.push_back(std::move(cache));
            ctx->as.push_back(std::move(a));
        }
        x = std::move(act);
    }
    Tensor out_col;
    Tensor z = out_conv_.forward(x, ctx ? &out_col : nullptr);
    Tensor y = nn::tanh_forward(z);
    if (ctx) {
        ctx->out_input = std::move(x);
        ctx->out_col = std::move(out_col);
        ctx->y = y;
    }
    return y;
}

Generator::DecodeGrads Generator::decode_backward(const DecodeContext& ctx,
                                                  const std::vector<AdaINParams>& affines,
                                                  const Tensor& dy, bool acc_param_grads) {
    DecodeGrads g;
    g.daffines.resize(dec_convs_.size());

    Tensor dz = nn::tanh_backward(ctx.y, dy);
    Tensor dx = out_conv_.backward(ctx.out_input.shape, ctx.out_col, dz, acc_param_grads);

    for (int i = static_cast<int>(dec_convs_.size()) - 1; i >= 0; --i) {
        Tensor da = nn::leaky_relu_backward(ctx.as[i], dx, cfg_.lrelu_slope);
        nn::AdainGrads ag = nn::adain_backward(ctx.zs[i], affines[i].scale, ctx.adain_caches[i],
                                               cfg_.adain_eps, da);
        g.daffines[i].scale = std::move(ag.dscale);
        g.daffines[i].bias = std::move(ag.dbias);
        Tensor dup = dec_convs_[i].backward(ctx.ups[i].shape, ctx.cols[i], ag.dx,
                                            acc_param_grads);
        dx = nn::upsample2x_backward(dup);
    }
    g.dcontent = std::move(dx);
    return g;
}

Tensor Generator::synthesize(const Tensor& source, const std::vector<Tensor>& references,
                             const Separator& separator) const {
    if (references.empty()) throw EmptyList("synthesize requires at least one reference");
    std::vector<Tensor> features;
    features.reserve(references.size());
    for (const Tensor& ref : references) features.push_back(separator.forward(ref).feature);
    const Tensor style = mean_style_feature(features);
    return decode(encode_content(source), style_affines(style));
}

nn::ParamList Generator::encoder_params(const std::string& prefix) {
    nn::ParamList out;
    for (std::size_t i = 0; i < enc_convs_.size(); ++i) {
        auto p = enc_convs_[i].params(prefix + ".conv" + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

nn::ParamList Generator::decoder_params(const std::string& prefix) {
    nn::ParamList out;
    for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
        auto p = dec_convs_[i].params(prefix + ".conv" + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    auto o = out_conv_.params(prefix + ".out");
    out.insert(out.end(), o.begin(), o.end());
    return out;
}

nn::ParamList Generator::affine_params(const std::string& prefix) {
    nn::ParamList out;
    for (std::size_t i = 0; i < affines_.size(); ++i) {
        auto p = affines_[i].params(prefix + ".affine" + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

// --- plain decoder (ablation) --------------------------------------------------

PlainDecoder::PlainDecoder(const NetConfig& cfg) : cfg_(cfg) {
    const int stages = cfg_.num_stages();
    const int content_ch = cfg_.content_channels();
    fuse_conv_ = nn::Conv2d(content_ch + cfg_.style_dim, content_ch, 1, 1, 0);
    for (int i = 0; i < stages; ++i)
        dec_convs_.emplace_back(decoder_channels(cfg_, i), decoder_channels(cfg_, i + 1), 3, 1, 1);
    out_conv_ = nn::Conv2d(decoder_channels(cfg_, stages), 1, 3, 1, 1);
}

void PlainDecoder::init(Rng& rng) {
    fuse_conv_.init(rng);
    for (auto& c : dec_convs_) c.init(rng);
    out_conv_.init(rng);
}

Tensor PlainDecoder::decode(const Tensor& content, const Tensor& style_feature,
                            Context* ctx) const {
    const int h = content.shape[1], w = content.shape[2];
    const int cc = content.shape[0], sc = static_cast<int>(style_feature.size());
    Tensor fused({cc + sc, h, w});
    std::copy(content.v.begin(), content.v.end(), fused.v.begin());
    for (int c = 0; c < sc; ++c)
        for (int i = 0; i < h * w; ++i)
            fused.v[static_cast<std::size_t>(cc + c) * h * w + i] = style_feature[c];

    Tensor fuse_col;
    Tensor fz = fuse_conv_.forward(fused, ctx ? &fuse_col : nullptr);
    Tensor x = nn::leaky_relu(fz, cfg_.lrelu_slope);
    if (ctx) {
        ctx->fused_input = fused;
        ctx->fuse_col = std::move(fuse_col);
        ctx->fuse_z = std::move(fz);
    }

    for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
        Tensor up = nn::upsample2x(x);
        Tensor col;
        Tensor z = dec_convs_[i].forward(up, ctx ? &col : nullptr);
        Tensor a = nn::leaky_relu(z, cfg_.lrelu_slope);
        if (ctx) {
            ctx->ups.push_back(std::move(up));
            ctx->cols.push_back(std::move(col));
            ctx->zs.push_back(std::move(z));
        }
        x = std::move(a);
    }
    Tensor out_col;
    Tensor z = out_conv_.forward(x, ctx ? &out_col : nullptr);
    Tensor y = nn::tanh_forward(z);
    if (ctx) {
        ctx->out_input = std::move(x);
        ctx->out_col = std::move(out_col);
        ctx->y = y;
    }
    return y;
}

PlainDecoder::Grads PlainDecoder::decode_backward(const Context& ctx, const Tensor& dy,
                                                  bool acc_param_grads) {
    Tensor dz = nn::tanh_backward(ctx.y, dy);
    Tensor dx = out_conv_.backward(ctx.out_input.shape, ctx.out_col, dz, acc_param_grads);
    for (int i = static_cast<int>(dec_convs_.size()) - 1; i >= 0; --i) {
        Tensor d = nn::leaky_relu_backward(ctx.zs[i], dx, cfg_.lrelu_slope);
        Tensor dup = dec_convs_[i].backward(ctx.ups[i].shape, ctx.cols[i], d, acc_param_grads);
        dx = nn::upsample2x_backward(dup);
    }
    Tensor dfz = nn::leaky_relu_backward(ctx.fuse_z, dx, cfg_.lrelu_slope);
    Tensor dfused =
        fuse_conv_.backward(ctx.fused_input.shape, ctx.fuse_col, dfz, acc_param_grads);

    Grads g;
    const int h = ctx.fused_input.shape[1], w = ctx.fused_input.shape[2];
    const int sc = cfg_.style_dim;
    const int cc = ctx.fused_input.shape[0] - sc;
    g.dcontent = Tensor({cc, h, w});
    std::copy(dfused.v.begin(), dfused.v.begin() + static_cast<std::size_t>(cc) * h * w,
              g.dcontent.v.begin());
    g.dstyle_feature = Tensor({sc});
    for (int c = 0; c < sc; ++c) {
        double s = 0.0;
        for (int i = 0; i < h * w; ++i)
            s += dfused.v[static_cast<std::size_t>(cc + c) * h * w + i];
        g.dstyle_feature[c] = s;
    }
    return g;
}

nn::ParamList PlainDecoder::params(const std::string& prefix) {
    nn::ParamList out = fuse_conv_.params(prefix + ".fuse");
    for (std::size_t i = 0; i < dec_convs_.size(); ++i) {
        auto p = dec_convs_[i].params(prefix + ".conv" + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    auto o = out_conv_.params(prefix + ".out");
    out.insert(out.end(), o.begin(), o.end());
    return out;
}

}  // namespace fontnet
