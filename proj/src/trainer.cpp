#include "fontnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fontnet/image.hpp"

namespace fontnet {

using json = nlohmann::json;

std::string to_string(AblationVariant v) {
    switch (v) {
        case AblationVariant::full: return "full";
        case AblationVariant::no_separator: return "no_separator";
        case AblationVariant::plain_decoder: return "plain_decoder";
    }
    throw UnknownVariant("bad ablation variant");
}

AblationVariant ablation_from_string(const std::string& s) {
    if (s == "full") return AblationVariant::full;
    if (s == "no_separator") return AblationVariant::no_separator;
    if (s == "plain_decoder") return AblationVariant::plain_decoder;
    throw UnknownVariant("unknown ablation variant: " + s);
}

void TrainConfig::validate() const {
    if (batch_size < 1 || k_references < 1 || steps < 0)
        throw ParamOutOfRange("batch_size/k_references/steps must be positive");
    if (lr_g <= 0.0 || lr_d <= 0.0 || lr_sep <= 0.0)
        throw ParamOutOfRange("learning rates must be positive");
    if (r1_gamma < 0.0) throw ParamOutOfRange("r1_gamma must be >= 0");
    Margin{margin_alpha}.validate();
    weights.validate();
    NetConfig nc;
    nc.resolution = resolution;
    nc.num_stages();  // validates power-of-two resolution
}

std::string TrainConfig::to_json() const {
    json j;
    j["resolution"] = resolution;
    j["embedding_dim"] = embedding_dim;
    j["style_dim"] = style_dim;
    j["base_channels"] = base_channels;
    j["max_channels"] = max_channels;
    j["batch_size"] = batch_size;
    j["k_references"] = k_references;
    j["steps"] = steps;
    j["lr_g"] = lr_g;
    j["lr_d"] = lr_d;
    j["lr_sep"] = lr_sep;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["r1_gamma"] = r1_gamma;
    j["margin_alpha"] = margin_alpha;
    j["lambda_l1"] = weights.lambda_l1;
    j["lambda_gstyle"] = weights.lambda_gstyle;
    j["lambda_encstyle"] = weights.lambda_encstyle;
    j["seed"] = seed;
    j["ablation"] = to_string(ablation);
    j["content_font_id"] = content_font_id;
    j["checkpoint_every"] = checkpoint_every;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    TrainConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("resolution", c.resolution);
    get("embedding_dim", c.embedding_dim);
    get("style_dim", c.style_dim);
    get("base_channels", c.base_channels);
    get("max_channels", c.max_channels);
    get("batch_size", c.batch_size);
    get("k_references", c.k_references);
    get("steps", c.steps);
    get("lr_g", c.lr_g);
    get("lr_d", c.lr_d);
    get("lr_sep", c.lr_sep);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("r1_gamma", c.r1_gamma);
    get("margin_alpha", c.margin_alpha);
    get("lambda_l1", c.weights.lambda_l1);
    get("lambda_gstyle", c.weights.lambda_gstyle);
    get("lambda_encstyle", c.weights.lambda_encstyle);
    get("seed", c.seed);
    get("content_font_id", c.content_font_id);
    get("checkpoint_every", c.checkpoint_every);
    if (j.contains("ablation")) c.ablation = ablation_from_string(j.at("ablation"));
    c.validate();
    return c;
}

// --- assembly ------------------------------------------------------------------

Tensor ModelAssembly::synthesize(const Tensor& source,
                                 const std::vector<Tensor>& references) const {
    if (references.empty()) throw EmptyList("synthesize requires at least one reference");
    if (variant == AblationVariant::plain_decoder) {
        std::vector<Tensor> feats;
        for (const Tensor& r : references) feats.push_back(style_net().forward(r).feature);
        return plain_decoder->decode(generator->encode_content(source),
                                     mean_style_feature(feats));
    }
    return generator->synthesize(source, references, style_net());
}

nn::ParamList ModelAssembly::generator_side_params() {
    nn::ParamList out = generator->encoder_params();
    if (variant == AblationVariant::plain_decoder) {
        auto p = plain_decoder->params();
        out.insert(out.end(), p.begin(), p.end());
    } else {
        auto d = generator->decoder_params();
        out.insert(out.end(), d.begin(), d.end());
        auto a = generator->affine_params();
        out.insert(out.end(), a.begin(), a.end());
    }
    return out;
}

nn::ParamList ModelAssembly::discriminator_params() { return discriminator->params(); }

nn::ParamList ModelAssembly::all_params() {
    nn::ParamList out = generator_side_params();
    if (separator) {
        auto s = separator->params("separator");
        out.insert(out.end(), s.begin(), s.end());
    }
    if (style_encoder) {
        auto s = style_encoder->params("style_encoder");
        out.insert(out.end(), s.begin(), s.end());
    }
    auto d = discriminator_params();
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

ModelAssembly build_ablation(const TrainConfig& cfg, int n_fonts, int n_chars) {
    cfg.validate();
    ModelAssembly m;
    m.variant = cfg.ablation;
    m.net.resolution = cfg.resolution;
    m.net.embedding_dim = cfg.embedding_dim;
    m.net.style_dim = cfg.style_dim;
    m.net.base_channels = cfg.base_channels;
    m.net.max_channels = cfg.max_channels;
    m.net.n_fonts = n_fonts;
    m.net.n_chars = n_chars;

    Rng rng(cfg.seed ^ 0x1234ABCDULL);
    if (cfg.ablation == AblationVariant::no_separator) {
        m.style_encoder = std::make_unique<Separator>(m.net);
        m.style_encoder->init(rng);
    } else {
        m.separator = std::make_unique<Separator>(m.net);
        m.separator->init(rng);
    }
    m.generator = std::make_unique<Generator>(m.net);
    m.generator->init(rng);
    if (cfg.ablation == AblationVariant::plain_decoder) {
        m.plain_decoder = std::make_unique<PlainDecoder>(m.net);
        m.plain_decoder->init(rng);
    }
    m.discriminator = std::make_unique<Discriminator>(m.net);
    m.discriminator->init(rng);
    return m;
}

// --- trainer -----------------------------------------------------------------------

namespace {

Tensor scaled(const Tensor& t, double s) {
    Tensor out = t;
    out *= s;
    return out;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, const Corpus& corpus, DatasetSplit split)
    : cfg_(cfg), corpus_(&corpus), split_(std::move(split)),
      model_(build_ablation(cfg, corpus.n_fonts(), corpus.n_chars())), rng_(cfg.seed) {
    if (split_.train_fonts.empty()) throw InsufficientItems("split has no train fonts");
    content_font_ = cfg_.content_font_id >= 0 ? cfg_.content_font_id : split_.train_fonts.front();
    opt_g_ = {cfg_.lr_g, cfg_.beta1, cfg_.beta2};
    opt_d_ = {cfg_.lr_d, cfg_.beta1, cfg_.beta2};
    opt_sep_ = {cfg_.lr_sep, cfg_.beta1, cfg_.beta2};
}

LossReport Trainer::step() {
    const bool has_triplet_losses = model_.variant != AblationVariant::no_separator;

    std::vector<Triplet> mined;
    if (has_triplet_losses) {
        std::vector<Triplet> candidates;
        for (int i = 0; i < 4 * cfg_.batch_size; ++i)
            candidates.push_back(sample_triplet(split_, *corpus_, rng_));
        std::map<std::pair<int, int>, Tensor> embeddings;
        for (const Triplet& t : candidates)
            for (const GlyphImage* img : {&t.anchor, &t.positive, &t.negative}) {
                auto key = std::make_pair(img->font_id, img->char_id);
                if (!embeddings.count(key))
                    embeddings[key] =
                        model_.separator->forward(to_model_space(*img)).embedding;
            }
        mined = mine_hard_triplets(candidates, embeddings);
        if (static_cast<int>(mined.size()) > cfg_.batch_size) mined.resize(cfg_.batch_size);
    }

    GeneratorBatch batch = assemble_generator_batch(split_, *corpus_, cfg_.batch_size,
                                                    cfg_.k_references, content_font_, rng_);
    return train_step(batch, mined);
}

LossReport Trainer::train_step(const GeneratorBatch& batch, const std::vector<Triplet>& triplets) {
    const int B = static_cast<int>(batch.size());
    const double head_w = 1.0 / (2.0 * B);
    LossReport report;
    Separator& style_net = model_.style_net();
    Generator& gen = *model_.generator;
    Discriminator& disc = *model_.discriminator;
    const bool plain = model_.variant == AblationVariant::plain_decoder;
    const bool has_triplet_losses = model_.variant != AblationVariant::no_separator;

    // ---- discriminator update (generator and separator frozen) ----
    nn::ParamList d_params = model_.discriminator_params();
    nn::Adam::zero_grad(d_params);

    std::vector<Tensor> fakes;
    for (int i = 0; i < B; ++i) {
        std::vector<Tensor> refs;
        for (const GlyphImage& r : batch.references[i]) refs.push_back(to_model_space(r));
        fakes.push_back(model_.synthesize(to_model_space(batch.sources[i]), refs));
    }

    for (int i = 0; i < B; ++i) {
        const int font = batch.target_font_ids[i];
        const int chr = batch.target_char_ids[i];
        const Tensor real = to_model_space(batch.ground_truths[i]);

        Discriminator::Context ctx_r, ctx_f;
        MultiTaskLogits lr = disc.discriminate(real, &ctx_r);
        MultiTaskLogits lf = disc.discriminate(fakes[i], &ctx_f);
        auto [sr, cr] = select_logits(lr, font, chr);
        auto [sf, cf] = select_logits(lf, font, chr);
        const AdvLosses style_adv = adv_losses(sr, sf);
        const AdvLosses content_adv = adv_losses(cr, cf);
        report.adv_d += (style_adv.d_loss + content_adv.d_loss) / (2.0 * B);

        Tensor ds(lr.style_logits.shape), dc(lr.content_logits.shape);
        ds[font] = style_adv.dd_dreal * head_w;
        dc[chr] = content_adv.dd_dreal * head_w;
        disc.backward(ctx_r, ds, dc);
        ds[font] = style_adv.dd_dfake * head_w;
        dc[chr] = content_adv.dd_dfake * head_w;
        disc.backward(ctx_f, ds, dc);

        if (cfg_.r1_gamma > 0.0) disc.r1_penalty(real, font, chr, cfg_.r1_gamma / B);
    }
    opt_d_.step(d_params);

    // ---- generator + separator update (discriminator frozen) ----
    nn::ParamList g_params = model_.generator_side_params();
    nn::ParamList s_params =
        has_triplet_losses ? model_.separator->params() : model_.style_encoder->params();
    nn::Adam::zero_grad(g_params);
    nn::Adam::zero_grad(s_params);

    for (int i = 0; i < B; ++i) {
        const int font = batch.target_font_ids[i];
        const int chr = batch.target_char_ids[i];
        const Tensor src = to_model_space(batch.sources[i]);
        const Tensor gt = to_model_space(batch.ground_truths[i]);

        Generator::EncodeContext enc_ctx;
        const Tensor content = gen.encode_content(src, &enc_ctx);

        // Style features of the references. The separator (when present) is
        // updated only through the triplet losses, so the x^s pathway stops
        // its gradient at the feature; the ablation style encoder, having no
        // other training signal, is trained through this pathway instead.
        std::vector<Separator::Context> ref_ctxs;
        std::vector<Tensor> feats;
        const int k = static_cast<int>(batch.references[i].size());
        for (const GlyphImage& r : batch.references[i]) {
            if (!has_triplet_losses) {
                ref_ctxs.emplace_back();
                feats.push_back(
                    style_net.forward(to_model_space(r), &ref_ctxs.back()).feature);
            } else {
                feats.push_back(style_net.forward(to_model_space(r)).feature);
            }
        }
        const Tensor style_feat = mean_style_feature(feats);

        std::vector<AdaINParams> affines;
        Generator::DecodeContext dec_ctx;
        PlainDecoder::Context pd_ctx;
        Tensor y;
        if (plain) {
            y = model_.plain_decoder->decode(content, style_feat, &pd_ctx);
        } else {
            affines = gen.style_affines(style_feat);
            y = gen.decode(content, affines, &dec_ctx);
        }

        Tensor dy(y.shape);

        // pixel supervision
        auto [l1v, dl1] = l1_loss_grad(gt, y);
        report.l1 += l1v / B;
        if (cfg_.weights.lambda_l1 > 0.0) dy += scaled(dl1, cfg_.weights.lambda_l1 / B);

        // adversarial term, discriminator frozen
        Discriminator::Context ctx_f;
        MultiTaskLogits lf = disc.discriminate(y, &ctx_f);
        auto [sf, cf] = select_logits(lf, font, chr);
        const AdvLosses style_adv = adv_losses(0.0, sf);
        const AdvLosses content_adv = adv_losses(0.0, cf);
        report.adv_g += (style_adv.g_loss + content_adv.g_loss) / (2.0 * B);
        Tensor ds(lf.style_logits.shape), dc(lf.content_logits.shape);
        ds[font] = style_adv.dg_dfake * head_w;
        dc[chr] = content_adv.dg_dfake * head_w;
        dy += disc.backward(ctx_f, ds, dc, /*acc_param_grads=*/false);

        // style triplet on the generated image: positive = a real
        // reference of the target font, negative = the source glyph (same
        // char, different font)
        if (has_triplet_losses && cfg_.weights.lambda_gstyle > 0.0) {
            Separator::Context ctx_y, ctx_p, ctx_n;
            const Tensor fy = model_.separator->forward(y, &ctx_y).embedding;
            const Tensor fp =
                model_.separator->forward(to_model_space(batch.references[i][0]), &ctx_p)
                    .embedding;
            const Tensor fn = model_.separator->forward(src, &ctx_n).embedding;
            TripletGrads tg = gen_style_triplet_loss_grad(fy, fp, fn, cfg_.margin_alpha);
            report.g_style += tg.loss / B;
            const double w = cfg_.weights.lambda_gstyle / B;
            dy += model_.separator->backward(ctx_y, scaled(tg.dfa, w), {});
            model_.separator->backward(ctx_p, scaled(tg.dfp, w), {});
            model_.separator->backward(ctx_n, scaled(tg.dfn, w), {});
        }

        // back through the decoder into content and style pathways
        Tensor dcontent, dfeat;
        if (plain) {
            PlainDecoder::Grads dg = model_.plain_decoder->decode_backward(pd_ctx, dy);
            dcontent = std::move(dg.dcontent);
            dfeat = std::move(dg.dstyle_feature);
        } else {
            Generator::DecodeGrads dg = gen.decode_backward(dec_ctx, affines, dy);
            dcontent = std::move(dg.dcontent);
            dfeat = gen.style_affines_backward(style_feat, dg.daffines);
        }
        gen.encode_content_backward(enc_ctx, dcontent);
        if (!has_triplet_losses) {
            const Tensor dref_feat = scaled(dfeat, 1.0 / k);
            for (auto& ctx : ref_ctxs) style_net.backward(ctx, {}, dref_feat);
        }
    }

    // separator triplet loss on mined hard triplets
    if (has_triplet_losses && !triplets.empty()) {
        const double w = cfg_.weights.lambda_encstyle / static_cast<double>(triplets.size());
        for (const Triplet& t : triplets) {
            Separator::Context ca, cp, cn;
            const Tensor fa =
                model_.separator->forward(to_model_space(t.anchor), &ca).embedding;
            const Tensor fp =
                model_.separator->forward(to_model_space(t.positive), &cp).embedding;
            const Tensor fn =
                model_.separator->forward(to_model_space(t.negative), &cn).embedding;
            TripletGrads tg = triplet_loss_grad(fa, fp, fn, cfg_.margin_alpha);
            report.enc_style += tg.loss / static_cast<double>(triplets.size());
            if (cfg_.weights.lambda_encstyle > 0.0) {
                model_.separator->backward(ca, scaled(tg.dfa, w), {});
                model_.separator->backward(cp, scaled(tg.dfp, w), {});
                model_.separator->backward(cn, scaled(tg.dfn, w), {});
            }
        }
    }

    opt_g_.step(g_params);
    opt_sep_.step(s_params);
    ++step_;

    report.total_g = total_generator_objective(report.adv_g, report.l1, report.g_style,
                                               report.enc_style, cfg_.weights);
    if (!report.all_finite()) {
        if (!diag_dir.empty()) {
            std::filesystem::create_directories(diag_dir);
            save_checkpoint(diag_dir + "/nonfinite_step" + std::to_string(step_) + ".ckpt");
        }
        throw NonFiniteLoss("non-finite loss at step " + std::to_string(step_));
    }
    return report;
}

void Trainer::run(long until_step, std::ostream* log) {
    while (step_ < until_step) {
        LossReport r = step();
        if (log) *log << r.to_json_line(step_) << "\n";
    }
}

}  // namespace fontnet
