// Acceptance suite: one pass/fail line per criterion. Criteria 1-6 are
// oracle/property checks; 7-8 run the desk-scale end-to-end training and the
// directional ablation comparison. All tolerances are pinned inline.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <vector>

#include "fontnet/discriminator.hpp"
#include "fontnet/evaluation.hpp"
#include "fontnet/generator.hpp"
#include "fontnet/objectives.hpp"
#include "fontnet/separator.hpp"
#include "fontnet/trainer.hpp"
#include "test_util.hpp"

using namespace fontnet;
using namespace fontnet::testutil;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail = "") {
    std::printf("criterion %d (%s): %s%s%s\n", idx, name, ok ? "PASS" : "FAIL",
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

NetConfig small_net() {
    NetConfig cfg;
    cfg.resolution = 16;
    cfg.embedding_dim = 8;
    cfg.style_dim = 6;
    cfg.base_channels = 4;
    cfg.max_channels = 16;
    cfg.n_fonts = 3;
    cfg.n_chars = 5;
    return cfg;
}

// ---- criterion 1: loss kernels vs brute force -------------------------------

bool criterion_loss_kernels() {
    Rng rng(1001);
    const double tol = 1e-9;
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + static_cast<int>(rng.uniform_index(12));
        const Tensor fa = random_tensor({d}, rng), fp = random_tensor({d}, rng),
                     fn = random_tensor({d}, rng);
        const double alpha = rng.uniform(0.01, 2.0);
        double dap = 0.0, dan = 0.0;
        for (int i = 0; i < d; ++i) {
            dap += (fa.v[i] - fp.v[i]) * (fa.v[i] - fp.v[i]);
            dan += (fa.v[i] - fn.v[i]) * (fa.v[i] - fn.v[i]);
        }
        const double want = std::max(0.0, dap - dan + alpha);
        if (rel_err(triplet_loss(fa, fp, fn, alpha), want) > tol) return false;
        if (rel_err(gen_style_triplet_loss(fa, fp, fn, alpha), want) > tol) return false;

        const Tensor gt = random_tensor({1, 4, 4}, rng), y = random_tensor({1, 4, 4}, rng);
        double l1 = 0.0;
        for (std::size_t i = 0; i < gt.size(); ++i) l1 += std::abs(gt.v[i] - y.v[i]);
        l1 /= static_cast<double>(gt.size());
        if (rel_err(l1_loss(gt, y), l1) > tol) return false;

        const double r = rng.uniform(-20.0, 20.0), f = rng.uniform(-20.0, 20.0);
        const AdvLosses a = adv_losses(r, f);
        const double want_d = std::log1p(std::exp(-std::abs(r))) + std::max(-r, 0.0) +
                              std::log1p(std::exp(-std::abs(f))) + std::max(f, 0.0);
        const double want_g = std::log1p(std::exp(-std::abs(f))) + std::max(-f, 0.0);
        if (rel_err(a.d_loss, want_d) > tol || rel_err(a.g_loss, want_g) > tol) return false;

        LossWeights w;
        w.lambda_l1 = rng.uniform(0.0, 3.0);
        w.lambda_gstyle = rng.uniform(0.0, 3.0);
        w.lambda_encstyle = rng.uniform(0.0, 3.0);
        const double adv = rng.normal(), gl1 = rng.uniform(), gs = rng.uniform(),
                     es = rng.uniform();
        const double want_total = adv + w.lambda_l1 * gl1 + w.lambda_gstyle * gs +
                                  w.lambda_encstyle * es;
        if (rel_err(total_generator_objective(adv, gl1, gs, es, w), want_total) > tol)
            return false;
    }
    return true;
}

// ---- criterion 2: analytic gradients vs central finite differences ----------

struct GradTally {
    int checked = 0;
    int failed = 0;
    void check(double analytic, double fd, double tol = 1e-3) {
        if (std::abs(fd) < 1e-8 && std::abs(analytic) < 1e-8) return;
        ++checked;
        if (rel_err(analytic, fd) > tol) ++failed;
    }
};

bool criterion_gradients(std::string& detail) {
    GradTally tally;
    Rng rng(2002);

    // loss gradients
    for (int trial = 0; trial < 10; ++trial) {
        Tensor fa = random_tensor({6}, rng), fp = random_tensor({6}, rng),
               fn = random_tensor({6}, rng);
        const double alpha = 1.5;  // large margin keeps the hinge active
        if (triplet_loss(fa, fp, fn, alpha) < 1e-3) continue;
        const TripletGrads g = triplet_loss_grad(fa, fp, fn, alpha);
        auto l = [&]() { return triplet_loss(fa, fp, fn, alpha); };
        for (int i = 0; i < 6; ++i) {
            tally.check(g.dfa[i], central_diff(fa, i, l, 1e-6));
            tally.check(g.dfp[i], central_diff(fp, i, l, 1e-6));
            tally.check(g.dfn[i], central_diff(fn, i, l, 1e-6));
        }
    }
    for (int trial = 0; trial < 25; ++trial) {
        const double h = 1e-6;
        const double r = rng.uniform(-4.0, 4.0), f = rng.uniform(-4.0, 4.0);
        const AdvLosses a = adv_losses(r, f);
        tally.check(a.dd_dreal, (adv_losses(r + h, f).d_loss - adv_losses(r - h, f).d_loss) / (2 * h));
        tally.check(a.dd_dfake, (adv_losses(r, f + h).d_loss - adv_losses(r, f - h).d_loss) / (2 * h));
        tally.check(a.dg_dfake, (adv_losses(r, f + h).g_loss - adv_losses(r, f - h).g_loss) / (2 * h));
    }
    {
        const Tensor gt = random_tensor({1, 5, 5}, rng);
        Tensor y = random_tensor({1, 5, 5}, rng);
        auto [l, dy] = l1_loss_grad(gt, y);
        auto f = [&]() { return l1_loss(gt, y); };
        for (std::size_t i = 0; i < y.size(); ++i)
            tally.check(dy.v[i], central_diff(y, i, f, 1e-7));
    }

    // AdaIN
    {
        Tensor x = random_tensor({3, 5, 5}, rng);
        Tensor scale = random_tensor({3}, rng), bias = random_tensor({3}, rng);
        const Tensor w = random_tensor({3 * 25}, rng);
        auto f = [&]() { return dot(nn::adain(x, scale, bias, 1e-5), w); };
        nn::AdainCache cache;
        nn::adain(x, scale, bias, 1e-5, &cache);
        Tensor dy(x.shape);
        dy.v = w.v;
        const nn::AdainGrads g = nn::adain_backward(x, scale, cache, 1e-5, dy);
        for (std::size_t i = 0; i < x.size(); i += 3) tally.check(g.dx.v[i], central_diff(x, i, f));
        for (int c = 0; c < 3; ++c) {
            tally.check(g.dscale[c], central_diff(scale, c, f));
            tally.check(g.dbias[c], central_diff(bias, c, f));
        }
    }

    const NetConfig cfg = small_net();
    Rng net_rng(7);

    // separator
    {
        Separator sep(cfg);
        sep.init(net_rng);
        Tensor img = random_tensor({1, 16, 16}, rng);
        const Tensor we = random_tensor({cfg.embedding_dim}, rng);
        const Tensor wf = random_tensor({cfg.style_dim}, rng);
        auto f = [&]() {
            const Separator::Output o = sep.forward(img);
            return dot(o.embedding, we) + dot(o.feature, wf);
        };
        Separator::Context ctx;
        sep.forward(img, &ctx);
        nn::Adam::zero_grad(sep.params());
        const Tensor dimg = sep.backward(ctx, we, wf, true);
        for (std::size_t i = 0; i < img.size(); i += 37)
            tally.check(dimg.v[i], central_diff(img, i, f));
        for (auto& [name, p] : sep.params()) {
            const std::size_t stride = std::max<std::size_t>(1, p->value.size() / 4);
            for (std::size_t i = 0; i < p->value.size(); i += stride)
                tally.check(p->grad.v[i], central_diff(p->value, i, f));
        }
    }

    // generator encode + decode at 16x16
    {
        Generator gen(cfg);
        gen.init(net_rng);
        Tensor content = random_tensor({cfg.content_channels(), 4, 4}, rng);
        Tensor style = random_tensor({cfg.style_dim}, rng);
        const Tensor w = random_tensor({256}, rng);
        auto f = [&]() { return dot(gen.decode(content, gen.style_affines(style)), w); };
        Generator::DecodeContext ctx;
        const auto affines = gen.style_affines(style);
        const Tensor y = gen.decode(content, affines, &ctx);
        Tensor dy(y.shape);
        dy.v = w.v;
        nn::ParamList gp = gen.decoder_params();
        for (auto& np : gen.affine_params()) gp.push_back(np);
        nn::Adam::zero_grad(gp);
        const Generator::DecodeGrads g = gen.decode_backward(ctx, affines, dy, true);
        const Tensor dstyle = gen.style_affines_backward(style, g.daffines, true);
        for (std::size_t i = 0; i < content.size(); i += 9)
            tally.check(g.dcontent.v[i], central_diff(content, i, f), 2e-3);
        for (std::size_t i = 0; i < style.size(); ++i)
            tally.check(dstyle.v[i], central_diff(style, i, f), 2e-3);
        for (auto& [name, p] : gp) {
            const std::size_t stride = std::max<std::size_t>(1, p->value.size() / 3);
            for (std::size_t i = 0; i < p->value.size(); i += stride)
                tally.check(p->grad.v[i], central_diff(p->value, i, f), 2e-3);
        }

        Tensor src = random_tensor({1, 16, 16}, rng);
        const Tensor wc = random_tensor({cfg.content_channels() * 16}, rng);
        auto fe = [&]() { return dot(gen.encode_content(src), wc); };
        Generator::EncodeContext ectx;
        const Tensor c2 = gen.encode_content(src, &ectx);
        Tensor dc(c2.shape);
        dc.v = wc.v;
        nn::Adam::zero_grad(gen.encoder_params());
        const Tensor dsrc = gen.encode_content_backward(ectx, dc, true);
        for (std::size_t i = 0; i < src.size(); i += 29)
            tally.check(dsrc.v[i], central_diff(src, i, fe), 2e-3);
        for (auto& [name, p] : gen.encoder_params()) {
            const std::size_t stride = std::max<std::size_t>(1, p->value.size() / 3);
            for (std::size_t i = 0; i < p->value.size(); i += stride)
                tally.check(p->grad.v[i], central_diff(p->value, i, fe), 2e-3);
        }
    }

    // discriminator, including the exact R1 parameter gradient
    {
        Discriminator d(cfg);
        d.init(net_rng);
        Tensor img = random_tensor({1, 16, 16}, rng, 0.5);
        const Tensor ws = random_tensor({cfg.n_fonts}, rng);
        const Tensor wc = random_tensor({cfg.n_chars}, rng);
        auto f = [&]() {
            const MultiTaskLogits o = d.discriminate(img);
            return dot(o.style_logits, ws) + dot(o.content_logits, wc);
        };
        Discriminator::Context ctx;
        d.discriminate(img, &ctx);
        nn::Adam::zero_grad(d.params());
        const Tensor dimg = d.backward(ctx, ws, wc, true);
        for (std::size_t i = 0; i < img.size(); i += 31)
            tally.check(dimg.v[i], central_diff(img, i, f));
        for (auto& [name, p] : d.params()) {
            const std::size_t stride = std::max<std::size_t>(1, p->value.size() / 4);
            for (std::size_t i = 0; i < p->value.size(); i += stride)
                tally.check(p->grad.v[i], central_diff(p->value, i, f));
        }

        const double gamma = 1.3;
        auto fp = [&]() {
            Discriminator::Context c;
            d.discriminate(img, &c);
            Tensor ds({cfg.n_fonts}), dcg({cfg.n_chars});
            ds[1] = 1.0;
            dcg[0] = 1.0;
            return 0.5 * gamma * squared_l2(d.backward(c, ds, dcg, false));
        };
        nn::Adam::zero_grad(d.params());
        d.r1_penalty(img, 1, 0, gamma);
        for (auto& [name, p] : d.params()) {
            const std::size_t stride = std::max<std::size_t>(1, p->value.size() / 4);
            for (std::size_t i = 0; i < p->value.size(); i += stride)
                tally.check(p->grad.v[i], central_diff(p->value, i, fp));
        }
    }

    std::ostringstream os;
    os << tally.checked << " coordinates checked, " << tally.failed << " outside 1e-3";
    detail = os.str();
    return tally.failed == 0 && tally.checked >= 200;
}

// ---- criterion 3: AdaIN moment contract --------------------------------------

bool criterion_adain_moments() {
    Rng rng(3003);
    for (int C : {1, 4, 64}) {
        Tensor x = random_tensor({C, 8, 8}, rng, 2.0);
        Tensor scale = random_tensor({C}, rng), bias = random_tensor({C}, rng);
        const double eps = 1e-5;
        const Tensor y = nn::adain(x, scale, bias, eps);
        const int n = 64;
        for (int c = 0; c < C; ++c) {
            double mu = 0.0;
            for (int i = 0; i < n; ++i) mu += y.v[static_cast<std::size_t>(c) * n + i];
            mu /= n;
            double var = 0.0;
            for (int i = 0; i < n; ++i) {
                const double d = y.v[static_cast<std::size_t>(c) * n + i] - mu;
                var += d * d;
            }
            const double sd = std::sqrt(var / n);
            double xmu = 0.0;
            for (int i = 0; i < n; ++i) xmu += x.v[static_cast<std::size_t>(c) * n + i];
            xmu /= n;
            double xvar = 0.0;
            for (int i = 0; i < n; ++i) {
                const double d = x.v[static_cast<std::size_t>(c) * n + i] - xmu;
                xvar += d * d;
            }
            const double xsd = std::sqrt(xvar / n);
            if (std::abs(mu - bias[c]) > 1e-4) return false;
            if (std::abs(sd - std::abs(scale[c]) * xsd / (xsd + eps)) > 1e-4) return false;
        }
    }
    return true;
}

// ---- criterion 4: triplet constraints + mining oracle ------------------------

bool criterion_triplets() {
    const Corpus corpus = Corpus::synthetic(6, 12, 32, 3);
    std::vector<int> chars(12);
    for (int i = 0; i < 12; ++i) chars[i] = i;
    const DatasetSplit split = build_split(6, 0.67, chars, 9, 2);
    const std::set<int> tf(split.train_fonts.begin(), split.train_fonts.end());
    const std::set<int> tc(split.train_chars.begin(), split.train_chars.end());

    Rng rng(4004);
    for (int i = 0; i < 10000; ++i) {
        const Triplet t = sample_triplet(split, corpus, rng);
        if (t.anchor.font_id != t.positive.font_id) return false;
        if (t.anchor.char_id == t.positive.char_id) return false;
        if (t.negative.char_id != t.anchor.char_id) return false;
        if (t.negative.font_id == t.anchor.font_id) return false;
        if (!tf.count(t.anchor.font_id) || !tf.count(t.negative.font_id)) return false;
        if (!tc.count(t.anchor.char_id) || !tc.count(t.positive.char_id)) return false;
    }

    // mining equals the brute-force filter on every instance up to 100 triplets
    for (int size : {1, 5, 20, 60, 100}) {
        std::vector<Triplet> triplets;
        for (int i = 0; i < size; ++i) triplets.push_back(sample_triplet(split, corpus, rng));
        std::map<std::pair<int, int>, Tensor> emb;
        for (const Triplet& t : triplets)
            for (const GlyphImage* g : {&t.anchor, &t.positive, &t.negative})
                if (!emb.count({g->font_id, g->char_id}))
                    emb[{g->font_id, g->char_id}] = random_tensor({6}, rng);
        auto d2 = [&](const GlyphImage& a, const GlyphImage& b) {
            const Tensor& ea = emb.at({a.font_id, a.char_id});
            const Tensor& eb = emb.at({b.font_id, b.char_id});
            double s = 0.0;
            for (std::size_t i = 0; i < ea.size(); ++i)
                s += (ea.v[i] - eb.v[i]) * (ea.v[i] - eb.v[i]);
            return s;
        };
        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i < triplets.size(); ++i)
            if (d2(triplets[i].anchor, triplets[i].negative) <
                d2(triplets[i].anchor, triplets[i].positive))
                expected.push_back(i);
        const std::vector<Triplet> mined = mine_hard_triplets(triplets, emb);
        if (expected.empty()) {
            if (mined.size() != 1) return false;
        } else {
            if (mined.size() != expected.size()) return false;
            for (std::size_t i = 0; i < mined.size(); ++i) {
                const Triplet& a = mined[i];
                const Triplet& b = triplets[expected[i]];
                if (a.anchor.font_id != b.anchor.font_id || a.anchor.char_id != b.anchor.char_id ||
                    a.positive.char_id != b.positive.char_id ||
                    a.negative.font_id != b.negative.font_id)
                    return false;
            }
        }
    }
    return true;
}

// ---- criterion 5: metric oracles ---------------------------------------------

bool criterion_metrics() {
    const int d = 4;
    Tensor mu1({d}), mu2({d}), eye({d, d});
    for (int i = 0; i < d; ++i) eye.v[i * d + i] = 1.0;
    if (std::abs(frechet_distance(mu1, eye, mu1, eye)) > 1e-6) return false;
    mu2[0] = 3.0;
    mu2[2] = -1.0;
    if (std::abs(frechet_distance(mu1, eye, mu2, eye) - 10.0) > 1e-6) return false;
    // diagonal case: cov1 = I, cov2 = 4I, equal means ->
    // sum_i (1 - 2)^2 = d = 4 ... with d=4 and sqrt spread 1 vs 2 the value is 4;
    // the doubled-diagonal single-coordinate variant equals 2: cov2 = I except
    // one 9 -> (1-3)^2 = 4? Use the generic diagonal closed form instead.
    Tensor c1({d, d}), c2({d, d});
    double want = 0.0;
    Rng rng(5005);
    Tensor m1({d}), m2({d});
    for (int i = 0; i < d; ++i) {
        const double a = rng.uniform(0.1, 4.0), b = rng.uniform(0.1, 4.0);
        c1.v[i * d + i] = a;
        c2.v[i * d + i] = b;
        m1[i] = rng.normal();
        m2[i] = rng.normal();
        want += (m1[i] - m2[i]) * (m1[i] - m2[i]) +
                (std::sqrt(a) - std::sqrt(b)) * (std::sqrt(a) - std::sqrt(b));
    }
    if (std::abs(frechet_distance(m1, c1, m2, c2) - want) > 1e-6) return false;
    // the canonical single-axis case: unit gaussians, one variance 4 vs 1,
    // equal means -> (2-1)^2 = 1; shifted by 1 on that axis -> 2
    Tensor cv({d, d}), mv({d});
    for (int i = 0; i < d; ++i) cv.v[i * d + i] = 1.0;
    Tensor cv2 = cv;
    cv2.v[0] = 4.0;
    mv[0] = 1.0;
    if (std::abs(frechet_distance(mv, cv, Tensor({d}), cv2) - 2.0) > 1e-6) return false;

    Rng prng(55);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x({20, 20});
        for (double& v : x.v) v = prng.uniform();
        if (ssim(x, x) != 1.0) return false;
    }
    auto closed = [](double a, double b) {
        const double c1c = 1e-4;
        return (2.0 * a * b + c1c) / (a * a + b * b + c1c);
    };
    for (auto [a, b] : {std::pair{0.25, 0.75}, {0.0, 1.0}, {0.6, 0.6}}) {
        Tensor xa({16, 16}), xb({16, 16});
        xa.fill(a);
        xb.fill(b);
        if (std::abs(ssim(xa, xb) - closed(a, b)) > 1e-6) return false;
    }

    // mfid equals brute-force per-class averaging
    const Corpus corpus = Corpus::synthetic(3, 6, 32, 11);
    const EvalClassifier clf = train_eval_classifier(corpus, {0, 1, 2}, {0, 1, 2, 3, 4, 5},
                                                     LabelKind::style, 555, 4);
    std::map<int, std::vector<Tensor>> gen, real;
    for (int f = 0; f < 3; ++f)
        for (int c = 0; c < 6; ++c) {
            const Tensor img = to_model_space(corpus.glyph(f, c));
            real[f].push_back(img);
            Tensor jig = img;
            for (double& v : jig.v) v = std::clamp(v + 0.1 * prng.normal(), -1.0, 1.0);
            gen[f].push_back(jig);
        }
    double brute = 0.0;
    for (int f = 0; f < 3; ++f) {
        std::vector<Tensor> fg, fr;
        for (const Tensor& x : gen[f]) fg.push_back(clf.features(x));
        for (const Tensor& x : real[f]) fr.push_back(clf.features(x));
        const GaussianStats g1 = fit_gaussian(fg), g2 = fit_gaussian(fr);
        brute += frechet_distance(g1.mean, g1.cov, g2.mean, g2.cov);
    }
    brute /= 3.0;
    return std::abs(mfid(clf, gen, real) - brute) < 1e-6 * std::max(1.0, brute);
}

// ---- criterion 6: determinism + checkpointing --------------------------------

bool criterion_determinism() {
    const Corpus corpus = Corpus::synthetic(4, 8, 32, 5);
    std::vector<int> chars(8);
    for (int i = 0; i < 8; ++i) chars[i] = i;
    const DatasetSplit split = build_split(4, 0.75, chars, 6, 3);
    TrainConfig cfg;
    cfg.resolution = 32;
    cfg.embedding_dim = 8;
    cfg.style_dim = 8;
    cfg.base_channels = 4;
    cfg.max_channels = 8;
    cfg.batch_size = 2;
    cfg.k_references = 2;
    cfg.seed = 7;

    std::ostringstream log_a, log_b;
    Trainer a(cfg, corpus, split), b(cfg, corpus, split);
    a.run(4, &log_a);
    b.run(4, &log_b);
    if (log_a.str() != log_b.str()) return false;  // byte-identical logs

    const Tensor src = to_model_space(corpus.glyph(split.train_fonts[0], 0));
    const Tensor ref = to_model_space(corpus.glyph(split.train_fonts[1], 1));
    if (a.model().synthesize(src, {ref}).v != b.model().synthesize(src, {ref}).v) return false;

    // save/load/resume equivalence, exactly
    const std::string path = "/tmp/fontnet_acceptance_ckpt.bin";
    Trainer straight(cfg, corpus, split);
    straight.run(6);
    Trainer half(cfg, corpus, split);
    half.run(3);
    half.save_checkpoint(path);
    Trainer resumed = Trainer::load_checkpoint(path, corpus, split);
    resumed.run(6);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
    for (auto& [name, p] : straight.model().all_params()) {
        for (auto& [rname, rp] : resumed.model().all_params())
            if (rname == name && rp->value.v != p->value.v) return false;
    }
    return resumed.step_count() == 6 &&
           resumed.model().synthesize(src, {ref}).v == straight.model().synthesize(src, {ref}).v;
}

// ---- criteria 7 + 8: desk-scale overfit run and directional ablations --------

struct RunOutcome {
    double train_l1 = 1e9;      // model-space L1 over train fonts x train chars
    double style_acc = 0.0;     // percent, synthesized test-char glyphs
    double content_acc = 0.0;   // percent, synthesized test-char glyphs
    bool losses_finite = true;
};

TrainConfig desk_config(AblationVariant v) {
    TrainConfig cfg;
    cfg.resolution = 32;
    cfg.embedding_dim = 32;
    cfg.style_dim = 64;
    cfg.base_channels = 16;
    cfg.max_channels = 64;
    cfg.batch_size = 8;
    cfg.k_references = 8;
    cfg.steps = 2000;
    cfg.seed = 11;
    // Strong pixel supervision plus a boosted generated-style triplet make the
    // restyling map transfer to held-out characters at this tiny scale, and
    // the large margin keeps triplet pressure on the separator all run long
    // instead of saturating the hinge early.
    cfg.weights.lambda_l1 = 20.0;
    cfg.weights.lambda_gstyle = 5.0;
    cfg.margin_alpha = 1.0;
    cfg.ablation = v;
    return cfg;
}

RunOutcome run_desk_scale(AblationVariant variant, const Corpus& corpus,
                          const DatasetSplit& split, const EvalClassifier& style_clf,
                          const EvalClassifier& content_clf) {
    const TrainConfig cfg = desk_config(variant);
    Trainer trainer(cfg, corpus, split);

    RunOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    for (long s = 0; s < cfg.steps; ++s) {
        const LossReport r = trainer.step();
        if (!r.all_finite()) {
            out.losses_finite = false;
            return out;
        }
        if ((s + 1) % 500 == 0) {
            const double mins =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
                60.0;
            std::printf("  [%s] step %ld/%ld l1=%.4f adv_d=%.4f (%.1f min)\n",
                        to_string(variant).c_str(), s + 1, cfg.steps, r.l1, r.adv_d, mins);
            std::fflush(stdout);
        }
    }

    const int content_font = trainer.content_font_id();

    auto synthesize_char = [&](int font, int ch) {
        std::vector<Tensor> refs;
        for (int rc : split.train_chars) {
            if (rc == ch) continue;
            refs.push_back(to_model_space(corpus.glyph(font, rc)));
            if (static_cast<int>(refs.size()) == cfg.k_references) break;
        }
        return trainer.model().synthesize(to_model_space(corpus.glyph(content_font, ch)), refs);
    };

    // deterministic shuffled k-subset of reference characters per draw, to
    // widen the accuracy sample beyond one reference set per glyph
    Rng ref_rng(4242);
    auto synthesize_char_draw = [&](int font, int ch) {
        std::vector<int> pool;
        for (int rc : split.train_chars)
            if (rc != ch) pool.push_back(rc);
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[ref_rng.uniform_index(i)]);
        std::vector<Tensor> refs;
        for (int i = 0; i < cfg.k_references; ++i)
            refs.push_back(to_model_space(corpus.glyph(font, pool[i])));
        return trainer.model().synthesize(to_model_space(corpus.glyph(content_font, ch)), refs);
    };

    // final train L1: synthesize every train-font/train-char pair the loop
    // actually trains on (targets exclude the content font)
    double l1 = 0.0;
    int n = 0;
    for (int f : split.train_fonts) {
        if (f == content_font) continue;
        for (int c : split.train_chars) {
            l1 += l1_loss(to_model_space(corpus.glyph(f, c)), synthesize_char(f, c));
            ++n;
        }
    }
    out.train_l1 = l1 / n;

    // oracle classifier accuracy on synthesized held-out-character glyphs,
    // five reference draws per (font, character) pair
    std::vector<Tensor> gen;
    std::vector<int> font_labels, char_labels;
    for (int f : split.train_fonts) {
        if (f == content_font) continue;
        for (int c : split.test_chars)
            for (int draw = 0; draw < 5; ++draw) {
                gen.push_back(synthesize_char_draw(f, c));
                font_labels.push_back(f);
                char_labels.push_back(c);
            }
    }
    out.style_acc = top1_accuracy(style_clf, gen, font_labels);
    out.content_acc = top1_accuracy(content_clf, gen, char_labels);
    return out;
}

}  // namespace

int main() {
    report(1, "loss kernels match brute force at 1e-9", criterion_loss_kernels());
    {
        std::string detail;
        const bool ok = criterion_gradients(detail);
        report(2, "analytic gradients match finite differences at 1e-3", ok, detail);
    }
    report(3, "AdaIN moment contract within 1e-4 for C in {1,4,64}", criterion_adain_moments());
    report(4, "triplet constraints and hard-mining oracle", criterion_triplets());
    report(5, "metric oracles (frechet/ssim/mfid closed forms)", criterion_metrics());
    report(6, "determinism, checkpoint and resume equivalence", criterion_determinism());

    // desk-scale runs (shared corpus/split/oracles)
    const Corpus corpus = Corpus::synthetic(4, 40, 32, 9);
    std::vector<int> chars(40);
    for (int i = 0; i < 40; ++i) chars[i] = i;
    const DatasetSplit split = build_split(4, 0.75, chars, 30, 3);
    std::vector<int> all_fonts{0, 1, 2, 3};
    const EvalClassifier style_clf =
        train_eval_classifier(corpus, all_fonts, chars, LabelKind::style, 777);
    const EvalClassifier content_clf =
        train_eval_classifier(corpus, all_fonts, chars, LabelKind::content, 778);

    const RunOutcome full =
        run_desk_scale(AblationVariant::full, corpus, split, style_clf, content_clf);
    {
        std::ostringstream os;
        os << "train L1 " << full.train_l1 << " (< 0.15), style acc " << full.style_acc
           << "% (> 80%), losses " << (full.losses_finite ? "finite" : "NON-FINITE");
        report(7, "desk-scale overfit: L1 and held-out-char style accuracy",
               full.losses_finite && full.train_l1 < 0.15 && full.style_acc > 80.0, os.str());
    }

    const RunOutcome nosep =
        run_desk_scale(AblationVariant::no_separator, corpus, split, style_clf, content_clf);
    const RunOutcome plain =
        run_desk_scale(AblationVariant::plain_decoder, corpus, split, style_clf, content_clf);
    {
        std::ostringstream os;
        os << "style acc full " << full.style_acc << "% vs no_separator " << nosep.style_acc
           << "%; content acc full " << full.content_acc << "% vs plain_decoder "
           << plain.content_acc << "%";
        report(8, "ablation dominance: full >= each ablation on its target metric",
               nosep.losses_finite && plain.losses_finite &&
                   full.style_acc >= nosep.style_acc && full.content_acc >= plain.content_acc,
               os.str());
    }

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
