#include "fontnet/separator.hpp"

#include <cmath>

namespace fontnet {

Separator::Separator(const NetConfig& cfg) : cfg_(cfg) {
    const int stages = cfg_.num_stages();
    int in_ch = 1;
    for (int i = 0; i < stages; ++i) {
        const int out_ch = (i == stages - 1) ? cfg_.style_dim : cfg_.stage_channels(i);
        convs_.emplace_back(in_ch, out_ch, 3, 2, 1);
        in_ch = out_ch;
    }
    head_ = nn::Linear(cfg_.style_dim, cfg_.embedding_dim);
}

void Separator::init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
    head_.init(rng);
}

Separator::Output Separator::forward(const Tensor& image, Context* ctx) const {
    if (image.shape.size() != 3 || image.shape[0] != 1 || image.shape[1] != cfg_.resolution ||
        image.shape[2] != cfg_.resolution)
        throw ShapeMismatch("separator expects 1x" + std::to_string(cfg_.resolution) + "x" +
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
    if (ctx) ctx->trunk_out = x;

    Tensor feature = nn::global_avg_pool(x);
    Tensor raw = head_.forward(feature);
    const double norm = std::sqrt(squared_l2(raw)) + 1e-12;
    Tensor embedding = raw;
    embedding *= 1.0 / norm;

    if (ctx) {
        ctx->feature = feature;
        ctx->embedding_raw = std::move(raw);
    }
    return {std::move(embedding), std::move(feature)};
}

Tensor Separator::backward(const Context& ctx, const Tensor& d_embedding, const Tensor& d_feature,
                           bool acc_param_grads) {
    Tensor d_feat = d_feature.empty() ? Tensor({cfg_.style_dim}) : d_feature;

    if (!d_embedding.empty()) {
        // e = u / ||u||: du = (de - e (e . de)) / ||u||
        const double norm = std::sqrt(squared_l2(ctx.embedding_raw)) + 1e-12;
        Tensor e = ctx.embedding_raw;
        e *= 1.0 / norm;
        const double proj = dot(e, d_embedding);
        Tensor d_raw(ctx.embedding_raw.shape);
        for (std::size_t i = 0; i < d_raw.size(); ++i)
            d_raw[i] = (d_embedding[i] - e[i] * proj) / norm;
        d_feat += head_.backward(ctx.feature, d_raw, acc_param_grads);
    }

    Tensor dx = nn::global_avg_pool_backward(ctx.trunk_out.shape, d_feat);
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        Tensor dz = nn::leaky_relu_backward(ctx.zs[i], dx, cfg_.lrelu_slope);
        dx = convs_[i].backward(ctx.inputs[i].shape, ctx.cols[i], dz, acc_param_grads);
    }
    return dx;
}

nn::ParamList Separator::params(const std::string& prefix) {
    nn::ParamList out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        auto p = convs_[i].params(prefix + ".conv" + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    auto h = head_.params(prefix + ".head");
    out.insert(out.end(), h.begin(), h.end());
    return out;
}

Tensor mean_style_feature(const std::vector<Tensor>& features) {
    if (features.empty()) throw EmptyList("mean_style_feature on empty list");
    Tensor mean(features.front().shape);
    for (const Tensor& f : features) {
        if (!same_shape(f, mean)) throw DimMismatch("style feature dims differ");
        mean += f;
    }
    mean *= 1.0 / static_cast<double>(features.size());
    return mean;
}

}  // namespace fontnet
