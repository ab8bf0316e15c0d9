#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "fontnet/evaluation.hpp"
#include "fontnet/png_io.hpp"
#include "test_util.hpp"

using namespace fontnet;
using namespace fontnet::testutil;

namespace {

Tensor noisy(const Tensor& x, double amp, Rng& rng) {
    Tensor y = x;
    for (double& v : y.v) v = std::clamp(v + amp * rng.normal(), 0.0, 1.0);
    return y;
}

}  // namespace

TEST_CASE("ssim of an image with itself is exactly one") {
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x({24, 24});
        for (double& v : x.v) v = rng.uniform();
        CHECK(ssim(x, x) == 1.0);
    }
}

TEST_CASE("ssim is symmetric and bounded") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a({20, 20}), b({20, 20});
        for (double& v : a.v) v = rng.uniform();
        for (double& v : b.v) v = rng.uniform();
        const double s1 = ssim(a, b), s2 = ssim(b, a);
        CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
        CHECK(s1 <= 1.0);
        CHECK(s1 >= -1.0);
    }
}

TEST_CASE("ssim of two constant images matches the closed form") {
    // zero variances: SSIM = (2 m1 m2 + C1) / (m1^2 + m2^2 + C1), C2 cancels
    auto closed = [](double m1, double m2) {
        const double c1 = 0.01 * 0.01;  // (K1 L)^2
        return (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
    };
    for (auto [m1, m2] : {std::pair{0.3, 0.7}, {0.0, 1.0}, {0.5, 0.5}, {0.9, 0.2}}) {
        Tensor a({16, 16}), b({16, 16});
        a.fill(m1);
        b.fill(m2);
        CHECK(ssim(a, b) == doctest::Approx(closed(m1, m2)).epsilon(1e-6));
    }
}

TEST_CASE("ssim decreases monotonically with noise amplitude") {
    const Corpus corpus = Corpus::synthetic(1, 4, 32, 3);
    Rng rng(4);
    int ordered = 0, total = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor& x = corpus.glyph(0, trial % 4).pixels;
        const double s_small = ssim(x, noisy(x, 0.02, rng));
        const double s_big = ssim(x, noisy(x, 0.2, rng));
        ++total;
        if (s_small > s_big) ++ordered;
    }
    CHECK(ordered >= 95);
    CHECK(total == 100);
}

TEST_CASE("ssim rejects mismatched or undersized inputs") {
    Tensor a({16, 16}), b({16, 8}), c({8, 8});
    CHECK_THROWS_AS(ssim(a, b), ShapeMismatch);
    CHECK_THROWS_AS(ssim(c, c), TooSmall);  // smaller than the 11x11 window
}

TEST_CASE("frechet distance closed forms") {
    const int d = 4;
    Tensor mu1({d}), mu2({d});
    Tensor eye({d, d});
    for (int i = 0; i < d; ++i) eye.v[i * d + i] = 1.0;

    // identical gaussians
    CHECK(frechet_distance(mu1, eye, mu1, eye) == doctest::Approx(0.0).epsilon(1e-9));

    // pure mean shift: distance is the squared norm of the shift
    mu2[0] = 3.0;
    mu2[2] = -1.0;
    CHECK(frechet_distance(mu1, eye, mu2, eye) == doctest::Approx(10.0).epsilon(1e-6));

    // diagonal covariances: sum over (mu_i - nu_i)^2 + (sqrt(a_i) - sqrt(b_i))^2
    Tensor c1({d, d}), c2({d, d});
    Rng rng(5);
    double want = 0.0;
    for (int i = 0; i < d; ++i) {
        const double a = rng.uniform(0.1, 4.0), b = rng.uniform(0.1, 4.0);
        c1.v[i * d + i] = a;
        c2.v[i * d + i] = b;
        const double dm = mu1[i] - mu2[i];
        want += dm * dm + (std::sqrt(a) - std::sqrt(b)) * (std::sqrt(a) - std::sqrt(b));
    }
    CHECK(frechet_distance(mu1, c1, mu2, c2) == doctest::Approx(want).epsilon(1e-6));

    // non-PSD covariance rejected
    Tensor bad = eye;
    bad.v[0] = -1.0;
    CHECK_THROWS_AS(frechet_distance(mu1, bad, mu2, eye), NotPSD);
}

TEST_CASE("frechet distance on sampled unit gaussians recovers the mean shift") {
    const int d = 4, n = 4000;
    Rng rng(6);
    std::vector<Tensor> s1, s2;
    for (int i = 0; i < n; ++i) {
        Tensor a({d}), b({d});
        for (int j = 0; j < d; ++j) {
            a[j] = rng.normal();
            b[j] = rng.normal();
        }
        b[0] += 3.0;  // N(3 e1, I): true distance 9
        s1.push_back(a);
        s2.push_back(b);
    }
    const GaussianStats g1 = fit_gaussian(s1), g2 = fit_gaussian(s2);
    const double fd = frechet_distance(g1.mean, g1.cov, g2.mean, g2.cov);
    CHECK(std::abs(fd - 9.0) < 0.5);
}

TEST_CASE("gaussian fitting matches the unbiased estimator") {
    Rng rng(7);
    std::vector<Tensor> xs;
    const int n = 50, d = 3;
    for (int i = 0; i < n; ++i) xs.push_back(random_tensor({d}, rng));
    const GaussianStats g = fit_gaussian(xs);
    for (int j = 0; j < d; ++j) {
        double m = 0.0;
        for (const Tensor& x : xs) m += x[j];
        m /= n;
        CHECK(g.mean[j] == doctest::Approx(m).epsilon(1e-12));
    }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double c = 0.0;
            for (const Tensor& x : xs) c += (x[a] - g.mean[a]) * (x[b] - g.mean[b]);
            c /= (n - 1);
            CHECK(g.cov.v[a * d + b] == doctest::Approx(c).epsilon(1e-10));
        }
    CHECK_THROWS_AS(fit_gaussian({xs[0]}), InsufficientSamples);
}

namespace {

// classifier plus corpus shared by the heavier cases
struct ClassifierFixture {
    Corpus corpus = Corpus::synthetic(3, 6, 32, 11);
    std::vector<int> fonts{0, 1, 2};
    std::vector<int> chars{0, 1, 2, 3, 4, 5};
};

}  // namespace

TEST_CASE("style classifier separates the synthetic fonts") {
    ClassifierFixture fx;
    const EvalClassifier clf =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::style, 21);
    int hits = 0, total = 0;
    for (int f : fx.fonts)
        for (int c : fx.chars) {
            const Tensor img = to_model_space(fx.corpus.glyph(f, c));
            if (clf.predict(img) == f) ++hits;
            ++total;
        }
    CHECK(hits >= static_cast<int>(0.95 * total));
}

TEST_CASE("content classifier separates the characters") {
    ClassifierFixture fx;
    const EvalClassifier clf =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::content, 22);
    int hits = 0, total = 0;
    for (int f : fx.fonts)
        for (int c : fx.chars) {
            const Tensor img = to_model_space(fx.corpus.glyph(f, c));
            if (clf.predict(img) == c) ++hits;
            ++total;
        }
    CHECK(hits >= static_cast<int>(0.95 * total));
}

TEST_CASE("classifier training is deterministic and label-order equivariant") {
    ClassifierFixture fx;
    const EvalClassifier a =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::style, 33, 5);
    const EvalClassifier b =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::style, 33, 5);
    for (int f : fx.fonts)
        for (int c : fx.chars) {
            const Tensor img = to_model_space(fx.corpus.glyph(f, c));
            CHECK(a.predict(img) == b.predict(img));
            const Tensor la = a.logits(img), lb = b.logits(img);
            CHECK(la.v == lb.v);
        }
}

TEST_CASE("top-1 accuracy matches the brute-force count") {
    ClassifierFixture fx;
    const EvalClassifier clf =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::style, 44, 8);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int f : fx.fonts)
        for (int c : fx.chars) {
            images.push_back(to_model_space(fx.corpus.glyph(f, c)));
            labels.push_back(f);
        }
    int hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (clf.predict(images[i]) == labels[i]) ++hits;
    const double want = 100.0 * static_cast<double>(hits) / static_cast<double>(images.size());
    CHECK(top1_accuracy(clf, images, labels) == doctest::Approx(want).epsilon(1e-12));
    CHECK_THROWS_AS(top1_accuracy(clf, {}, {}), EmptyInput);
}

TEST_CASE("mfid equals the per-class average of feature-space frechet distances") {
    ClassifierFixture fx;
    const EvalClassifier clf =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::style, 55, 5);

    Rng rng(9);
    std::map<int, std::vector<Tensor>> gen, real;
    for (int f : fx.fonts)
        for (int c : fx.chars) {
            const Tensor img = to_model_space(fx.corpus.glyph(f, c));
            real[f].push_back(img);
            Tensor jig = img;
            for (double& v : jig.v) v = std::clamp(v + 0.1 * rng.normal(), -1.0, 1.0);
            gen[f].push_back(jig);
        }

    double want = 0.0;
    for (int f : fx.fonts) {
        std::vector<Tensor> fg, fr;
        for (const Tensor& x : gen[f]) fg.push_back(clf.features(x));
        for (const Tensor& x : real[f]) fr.push_back(clf.features(x));
        const GaussianStats g1 = fit_gaussian(fg), g2 = fit_gaussian(fr);
        want += frechet_distance(g1.mean, g1.cov, g2.mean, g2.cov);
    }
    want /= static_cast<double>(fx.fonts.size());
    CHECK(mfid(clf, gen, real) == doctest::Approx(want).epsilon(1e-9));

    // a class with fewer than two samples on either side is rejected
    std::map<int, std::vector<Tensor>> thin = gen;
    thin[0].resize(1);
    CHECK_THROWS_AS(mfid(clf, thin, real), InsufficientSamples);
}

TEST_CASE("evaluation protocol produces finite metrics on an untrained model") {
    ClassifierFixture fx;
    std::vector<int> chars(6);
    for (int i = 0; i < 6; ++i) chars[i] = i;
    const DatasetSplit split = build_split(3, 0.67, chars, 4, 2);

    TrainConfig cfg;
    cfg.resolution = 32;
    cfg.embedding_dim = 8;
    cfg.style_dim = 8;
    cfg.base_channels = 4;
    cfg.max_channels = 8;
    cfg.seed = 1;
    const ModelAssembly model = build_ablation(cfg, 3, 6);

    const EvalClassifier style_clf =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::style, 66, 5);
    const EvalClassifier content_clf =
        train_eval_classifier(fx.corpus, fx.fonts, fx.chars, LabelKind::content, 67, 5);

    for (CharSet cs : {CharSet::seen, CharSet::unseen}) {
        const MetricsReport rep = evaluate(model, fx.corpus, split, cs, 2,
                                           split.train_fonts.front(), style_clf, content_clf);
        CHECK(std::isfinite(rep.ssim));
        CHECK(std::isfinite(rep.mfid_style));
        CHECK(std::isfinite(rep.mfid_content));
        CHECK(rep.acc_style >= 0.0);
        CHECK(rep.acc_style <= 100.0);
        CHECK(rep.acc_content >= 0.0);
        CHECK(rep.acc_content <= 100.0);
        CHECK(rep.split == (cs == CharSet::seen ? "seen" : "unseen"));
        CHECK(!rep.to_json().empty());
        CHECK(!rep.to_table().empty());
    }
}

TEST_CASE("sample grid layout: generated and ground-truth rows per font") {
    ClassifierFixture fx;
    std::vector<int> chars(6);
    for (int i = 0; i < 6; ++i) chars[i] = i;
    const DatasetSplit split = build_split(3, 0.67, chars, 4, 2);

    TrainConfig cfg;
    cfg.resolution = 32;
    cfg.embedding_dim = 8;
    cfg.style_dim = 8;
    cfg.base_channels = 4;
    cfg.max_channels = 8;
    cfg.seed = 3;
    const ModelAssembly model = build_ablation(cfg, 3, 6);

    const std::vector<int> fonts = {split.test_fonts.front(), split.train_fonts.back()};
    const std::vector<int> cols = {0, 1, 2};
    const std::string path = "/tmp/fontnet_test_grid.png";
    emit_sample_grid(model, fx.corpus, split, fonts, cols, 2, split.train_fonts.front(), path);

    const Tensor grid = read_gray_png(path);
    REQUIRE(grid.shape == std::vector<int>{2 * 2 * 32, 3 * 32});

    // the second row of each font pair holds the ground truth
    for (std::size_t fi = 0; fi < fonts.size(); ++fi)
        for (std::size_t ci = 0; ci < cols.size(); ++ci) {
            const Tensor& gt = fx.corpus.glyph(fonts[fi], cols[ci]).pixels;
            double max_err = 0.0;
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) {
                    const double got =
                        grid.v[static_cast<std::size_t>((fi * 2 + 1) * 32 + y) * grid.shape[1] +
                               ci * 32 + x];
                    max_err = std::max(max_err, std::abs(got - gt.v[y * 32 + x]));
                }
            CHECK(max_err < 1.0 / 255.0);  // 8-bit quantization only
        }
    std::filesystem::remove(path);
}
