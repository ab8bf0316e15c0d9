#include "fontnet/discriminator.hpp"

namespace fontnet {

std::pair<double, double> select_logits(const MultiTaskLogits& logits, int font_id, int char_id) {
    if (font_id < 0 || font_id >= static_cast<int>(logits.style_logits.size()))
        throw IndexOutOfRange("font_id out of range");
    if (char_id < 0 || char_id >= static_cast<int>(logits.content_logits.size()))
        throw IndexOutOfRange("char_id out of range");
    return {logits.style_logits[font_id], logits.content_logits[char_id]};
}

Discriminator::Discriminator(const NetConfig& cfg) : cfg_(cfg) {
    if (cfg_.n_fonts < 1 || cfg_.n_chars < 1)
        throw ParamOutOfRange("discriminator needs n_fonts and n_chars >= 1");
    const int stages = cfg_.num_stages();
    int in_ch = 1;
    for (int i = 0; i < stages; ++i) {
        convs_.emplace_back(in_ch, cfg_.stage_channels(i), 3, 2, 1);
        in_ch = cfg_.stage_channels(i);
    }
    const int flat = in_ch * 4 * 4;
    style_head_ = nn::Linear(flat, cfg_.n_fonts);
    content_head_ = nn::Linear(flat, cfg_.n_chars);
}

void Discriminator::init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
    style_head_.init(rng);
    content_head_.init(rng);
}

MultiTaskLogits Discriminator::discriminate(const Tensor& image, Context* ctx) const {
    if (image.shape.size() != 3 || image.shape[0] != 1 || image.shape[1] != cfg_.resolution ||
        image.shape[2] != cfg_.resolution)
        throw ShapeMismatch("discriminator expects 1x" + std::to_string(cfg_.resolution) + "x" +
                            std::to_string(cfg_.resolution) + " input");
    Tensor x = image;
    for (const auto& conv : convs_) {
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
    Tensor flat({static_cast<int>(x.size())});
    flat.v = x.v;
    MultiTaskLogits out;
    out.style_logits = style_head_.forward(flat);
    out.content_logits = content_head_.forward(flat);
    if (ctx) ctx->flat = std::move(flat);
    return out;
}

Tensor Discriminator::backward(const Context& ctx, const Tensor& dstyle_logits,
                               const Tensor& dcontent_logits, bool acc_param_grads) {
    Tensor dflat({static_cast<int>(ctx.flat.size())});
    if (!dstyle_logits.empty())
        dflat += style_head_.backward(ctx.flat, dstyle_logits, acc_param_grads);
    if (!dcontent_logits.empty())
        dflat += content_head_.backward(ctx.flat, dcontent_logits, acc_param_grads);

    const int stages = static_cast<int>(convs_.size());
    Tensor dx(std::vector<int>{convs_.back().out_ch, 4, 4});
    dx.v = dflat.v;
    for (int i = stages - 1; i >= 0; --i) {
        Tensor dz = nn::leaky_relu_backward(ctx.zs[i], dx, cfg_.lrelu_slope);
        dx = convs_[i].backward(ctx.inputs[i].shape, ctx.cols[i], dz, acc_param_grads);
    }
    return dx;
}

double Discriminator::r1_penalty(const Tensor& image, int font_id, int char_id, double gamma) {
    if (gamma == 0.0) return 0.0;

    // primal pass and input gradient g of the selected-logit sum
    Context ctx;
    MultiTaskLogits logits = discriminate(image, &ctx);
    Tensor dstyle({static_cast<int>(logits.style_logits.size())});
    Tensor dcontent({static_cast<int>(logits.content_logits.size())});
    if (font_id < 0 || font_id >= static_cast<int>(dstyle.size()))
        throw IndexOutOfRange("font_id out of range");
    if (char_id < 0 || char_id >= static_cast<int>(dcontent.size()))
        throw IndexOutOfRange("char_id out of range");
    dstyle[font_id] = 1.0;
    dcontent[char_id] = 1.0;
    const Tensor g = backward(ctx, dstyle, dcontent, /*acc_param_grads=*/false);

    const double penalty = 0.5 * gamma * squared_l2(g);

    // tangent (JVP) pass along the constant direction v = g, with activation
    // masks frozen from the primal pre-activations; bias tangents are zero
    std::vector<Tensor> t_inputs, t_cols;
    Tensor t = g;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        Tensor col;
        Tensor tz = convs_[i].forward(t, &col, /*use_bias=*/false);
        Tensor ta = nn::leaky_relu_backward(ctx.zs[i], tz, cfg_.lrelu_slope);  // mask multiply
        t_inputs.push_back(std::move(t));
        t_cols.push_back(std::move(col));
        t = std::move(ta);
    }
    Tensor t_flat({static_cast<int>(t.size())});
    t_flat.v = t.v;

    // reverse over the tangent network with output gradient gamma at the two
    // selected logits; this accumulates d(penalty)/d(params) exactly
    Tensor dts(dstyle.shape), dtc(dcontent.shape);
    dts[font_id] = gamma;
    dtc[char_id] = gamma;
    Tensor dflat({static_cast<int>(t_flat.size())});
    dflat += style_head_.backward(t_flat, dts, true, /*acc_bias_grad=*/false);
    dflat += content_head_.backward(t_flat, dtc, true, /*acc_bias_grad=*/false);

    Tensor dx(std::vector<int>{convs_.back().out_ch, 4, 4});
    dx.v = dflat.v;
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        Tensor dz = nn::leaky_relu_backward(ctx.zs[i], dx, cfg_.lrelu_slope);
        dx = convs_[i].backward(t_inputs[i].shape, t_cols[i], dz, true, /*acc_bias_grad=*/false);
    }
    return penalty;
}

nn::ParamList Discriminator::params(const std::string& prefix) {
    nn::ParamList out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        auto p = convs_[i].params(prefix + ".conv" + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    auto s = style_head_.params(prefix + ".style_head");
    out.insert(out.end(), s.begin(), s.end());
    auto c = content_head_.params(prefix + ".content_head");
    out.insert(out.end(), c.begin(), c.end());
    return out;
}

}  // namespace fontnet
