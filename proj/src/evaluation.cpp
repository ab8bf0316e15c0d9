#include "fontnet/evaluation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fontnet/image.hpp"
#include "fontnet/png_io.hpp"

namespace fontnet {

// --- SSIM ----------------------------------------------------------------------

double ssim(const Tensor& a, const Tensor& b) {
    if (!same_shape(a, b)) throw ShapeMismatch("ssim shape mismatch");
    if (a.shape.size() != 2) throw ShapeMismatch("ssim expects HxW rasters");
    const int h = a.shape[0], w = a.shape[1];
    constexpr int win = 11;
    if (h < win || w < win) throw TooSmall("ssim needs side >= 11");

    // normalized gaussian window, sigma = 1.5
    double kernel[win][win];
    double ksum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - 5.0, dx = j - 5.0;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            ksum += kernel[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) kernel[i][j] /= ksum;

    constexpr double C1 = 0.01 * 0.01;  // (K1 L)^2
    constexpr double C2 = 0.03 * 0.03;  // (K2 L)^2

    double total = 0.0;
    long count = 0;
    for (int y = 0; y + win <= h; ++y) {
        for (int x = 0; x + win <= w; ++x) {
            double mua = 0.0, mub = 0.0, eaa = 0.0, ebb = 0.0, eab = 0.0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double pa = a.v[static_cast<std::size_t>(y + i) * w + (x + j)];
                    const double pb = b.v[static_cast<std::size_t>(y + i) * w + (x + j)];
                    const double k = kernel[i][j];
                    mua += k * pa;
                    mub += k * pb;
                    eaa += k * pa * pa;
                    ebb += k * pb * pb;
                    eab += k * pa * pb;
                }
            const double vara = eaa - mua * mua;
            const double varb = ebb - mub * mub;
            const double cov = eab - mua * mub;
            const double num = (2.0 * mua * mub + C1) * (2.0 * cov + C2);
            const double den = (mua * mua + mub * mub + C1) * (vara + varb + C2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

// --- classifier -------------------------------------------------------------------

EvalClassifier::EvalClassifier(int resolution, LabelKind kind, std::vector<int> class_ids)
    : resolution_(resolution), kind_(kind), classes_(std::move(class_ids)) {
    if (classes_.size() < 2) throw InsufficientClasses("classifier needs >= 2 classes");
    NetConfig nc;
    nc.resolution = resolution;
    const int stages = nc.num_stages();
    int in_ch = 1;
    for (int i = 0; i < stages; ++i) {
        const int out_ch = std::min(64, 16 << i);
        convs_.emplace_back(in_ch, out_ch, 3, 2, 1);
        in_ch = out_ch;
    }
    feat_ = nn::Linear(in_ch, 64);
    head_ = nn::Linear(64, static_cast<int>(classes_.size()));
}

void EvalClassifier::init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
    feat_.init(rng);
    // zero-initialized head keeps training label-permutation equivariant
    head_.weight.value.zero();
    head_.bias.value.zero();
}

int EvalClassifier::class_index(int raw_id) const {
    auto it = std::find(classes_.begin(), classes_.end(), raw_id);
    if (it == classes_.end()) throw LabelOutOfRange("label not in classifier class set");
    return static_cast<int>(it - classes_.begin());
}

struct EvalClassifier::Forward {
    std::vector<Tensor> inputs, cols, zs;
    Tensor pooled;
    Tensor feat_z;    // pre-lrelu feature
    Tensor feature;   // post-lrelu, 64-dim
    Tensor logits;
};

EvalClassifier::Forward EvalClassifier::forward(const Tensor& image, bool keep) const {
    if (image.shape.size() != 3 || image.shape[1] != resolution_ ||
        image.shape[2] != resolution_)
        throw ShapeMismatch("classifier input resolution mismatch");
    Forward f;
    Tensor x = image;
    for (const auto& conv : convs_) {
        Tensor col;
        Tensor z = conv.forward(x, keep ? &col : nullptr);
        Tensor a = nn::leaky_relu(z, slope_);
        if (keep) {
            f.inputs.push_back(std::move(x));
            f.cols.push_back(std::move(col));
            f.zs.push_back(std::move(z));
        }
        x = std::move(a);
    }
    f.pooled = nn::global_avg_pool(x);
    if (keep) f.inputs.push_back(x);  // trunk output for GAP backward
    f.feat_z = feat_.forward(f.pooled);
    f.feature = nn::leaky_relu(f.feat_z, slope_);
    f.logits = head_.forward(f.feature);
    return f;
}

Tensor EvalClassifier::logits(const Tensor& image) const { return forward(image, false).logits; }

Tensor EvalClassifier::features(const Tensor& image) const {
    return forward(image, false).feature;
}

int EvalClassifier::predict(const Tensor& image) const {
    const Tensor l = logits(image);
    int best = 0;
    for (std::size_t i = 1; i < l.size(); ++i)
        if (l[i] > l[best]) best = static_cast<int>(i);
    return classes_[best];
}

double EvalClassifier::train_step(const Tensor& image, int raw_label, nn::Adam& opt) {
    const int y = class_index(raw_label);
    Forward f = forward(image, true);

    // softmax cross-entropy
    double mx = f.logits[0];
    for (double l : f.logits.v) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : f.logits.v) z += std::exp(l - mx);
    const double loss = -(f.logits[y] - mx - std::log(z));

    Tensor dlogits(f.logits.shape);
    for (std::size_t i = 0; i < dlogits.size(); ++i)
        dlogits[i] = std::exp(f.logits[i] - mx) / z - (static_cast<int>(i) == y ? 1.0 : 0.0);

    nn::ParamList ps = params();
    nn::Adam::zero_grad(ps);
    Tensor dfeat = head_.backward(f.feature, dlogits);
    Tensor dfz = nn::leaky_relu_backward(f.feat_z, dfeat, slope_);
    Tensor dpool = feat_.backward(f.pooled, dfz);
    Tensor dx = nn::global_avg_pool_backward(f.inputs.back().shape, dpool);
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        Tensor dz = nn::leaky_relu_backward(f.zs[i], dx, slope_);
        dx = convs_[i].backward(f.inputs[i].shape, f.cols[i], dz);
    }
    opt.step(ps);
    return loss;
}

nn::ParamList EvalClassifier::params() {
    nn::ParamList out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        auto p = convs_[i].params("clf.conv" + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    auto f = feat_.params("clf.feat");
    out.insert(out.end(), f.begin(), f.end());
    auto h = head_.params("clf.head");
    out.insert(out.end(), h.begin(), h.end());
    return out;
}

EvalClassifier train_eval_classifier(const Corpus& corpus, const std::vector<int>& fonts,
                                     const std::vector<int>& chars, LabelKind kind,
                                     std::uint64_t seed, int epochs) {
    if ((kind == LabelKind::style ? fonts.size() : chars.size()) < 2)
        throw InsufficientClasses("need >= 2 classes of the requested label kind");

    EvalClassifier clf(corpus.resolution(), kind,
                       kind == LabelKind::style ? fonts : chars);
    Rng rng(seed);
    clf.init(rng);
    nn::Adam opt{1e-3, 0.9, 0.999};

    std::vector<std::pair<int, int>> items;
    for (int f : fonts)
        for (int c : chars) items.emplace_back(f, c);

    for (int e = 0; e < epochs; ++e) {
        // seeded shuffle per epoch
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[rng.uniform_index(i)]);
        for (auto [f, c] : items) {
            const Tensor img = to_model_space(corpus.glyph(f, c));
            clf.train_step(img, kind == LabelKind::style ? f : c, opt);
        }
    }
    return clf;
}

double top1_accuracy(const EvalClassifier& classifier, const std::vector<Tensor>& images,
                     const std::vector<int>& labels) {
    if (images.empty()) throw EmptyInput("top1_accuracy on empty image list");
    if (images.size() != labels.size()) throw ShapeMismatch("images/labels size mismatch");
    long correct = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        classifier.class_index(labels[i]);  // validates the label
        if (classifier.predict(images[i]) == labels[i]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(images.size());
}

// --- FID -----------------------------------------------------------------------------

GaussianStats fit_gaussian(const std::vector<Tensor>& samples) {
    if (samples.size() < 2) throw InsufficientSamples("need >= 2 samples for covariance");
    const int d = static_cast<int>(samples.front().size());
    GaussianStats g;
    g.mean = Tensor({d});
    for (const Tensor& s : samples) g.mean += s;
    g.mean *= 1.0 / static_cast<double>(samples.size());

    g.cov = Tensor({d, d});
    for (const Tensor& s : samples)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                g.cov.v[static_cast<std::size_t>(i) * d + j] +=
                    (s[i] - g.mean[i]) * (s[j] - g.mean[j]);
    g.cov *= 1.0 / static_cast<double>(samples.size() - 1);
    return g;
}

double frechet_distance(const Tensor& mu1, const Tensor& cov1, const Tensor& mu2,
                        const Tensor& cov2) {
    const int d = static_cast<int>(mu1.size());
    if (static_cast<int>(mu2.size()) != d || cov1.shape != std::vector<int>{d, d} ||
        cov2.shape != std::vector<int>{d, d})
        throw DimMismatch("frechet_distance dimension mismatch");

    using Mat = Eigen::MatrixXd;
    auto to_mat = [d](const Tensor& t) {
        Mat m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = t.v[static_cast<std::size_t>(i) * d + j];
        return m;
    };

    // symmetrize and floor eigenvalues at 0 (tolerance 1e-6 beyond which the
    // input is rejected as not PSD)
    auto psd_sqrt = [](const Mat& m, Mat* sqrt_out, double* trace_out) {
        Mat sym = 0.5 * (m + m.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(sym);
        Eigen::VectorXd ev = es.eigenvalues();
        const double scale = std::max(1.0, std::abs(ev.maxCoeff()));
        for (int i = 0; i < ev.size(); ++i) {
            if (ev(i) < -1e-6 * scale) throw NotPSD("covariance has negative eigenvalues");
            if (ev(i) < 0.0) ev(i) = 0.0;
        }
        if (trace_out) *trace_out = ev.sum();
        if (sqrt_out)
            *sqrt_out = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
    };

    const Mat c1 = to_mat(cov1), c2 = to_mat(cov2);
    Mat c1_sqrt;
    double tr1 = 0.0;
    psd_sqrt(c1, &c1_sqrt, &tr1);
    double tr2 = 0.0;
    psd_sqrt(c2, nullptr, &tr2);

    // Tr((c1 c2)^{1/2}) = Tr sqrt(c1^{1/2} c2 c1^{1/2}), tiny negative
    // eigenvalues of the product clipped to 0
    Mat inner = c1_sqrt * c2 * c1_sqrt;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(inner);
    double tr_sqrt = 0.0;
    for (int i = 0; i < d; ++i) tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()(i)));

    double diff2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dm = mu1[i] - mu2[i];
        diff2 += dm * dm;
    }
    return std::max(0.0, diff2 + tr1 + tr2 - 2.0 * tr_sqrt);
}

double mfid(const EvalClassifier& classifier, const std::map<int, std::vector<Tensor>>& generated,
            const std::map<int, std::vector<Tensor>>& real) {
    if (generated.empty()) throw InsufficientSamples("mfid with no classes");
    double total = 0.0;
    int classes = 0;
    for (const auto& [cls, gen_images] : generated) {
        auto it = real.find(cls);
        if (it == real.end() || gen_images.size() < 2 || it->second.size() < 2)
            throw InsufficientSamples("mfid class " + std::to_string(cls) +
                                      " lacks >= 2 samples per side");
        std::vector<Tensor> gf, rf;
        for (const Tensor& img : gen_images) gf.push_back(classifier.features(img));
        for (const Tensor& img : it->second) rf.push_back(classifier.features(img));
        const GaussianStats g = fit_gaussian(gf);
        const GaussianStats r = fit_gaussian(rf);
        total += frechet_distance(g.mean, g.cov, r.mean, r.cov);
        ++classes;
    }
    return total / static_cast<double>(classes);
}

// --- evaluation protocol ------------------------------------------------------------

std::string MetricsReport::to_json() const {
    std::ostringstream os;
    os.precision(10);
    os << "{\"split\":\"" << split << "\",\"ssim\":" << ssim
       << ",\"mfid_content\":" << mfid_content << ",\"acc_content\":" << acc_content
       << ",\"mfid_style\":" << mfid_style << ",\"acc_style\":" << acc_style << "}";
    return os.str();
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    os.precision(4);
    os << "split    SSIM    mFID(C)  Acc(C)  mFID(S)  Acc(S)\n";
    os << split << "  " << std::fixed << ssim << "  " << mfid_content << "  " << acc_content
       << "  " << mfid_style << "  " << acc_style << "\n";
    return os.str();
}

namespace {

// Groups model-space images by class, keeping only classes with >= 2 samples
// per side; falls back to one pooled group when no class has enough (the
// desk-scale corpus often has a single test font).
std::pair<std::map<int, std::vector<Tensor>>, std::map<int, std::vector<Tensor>>> group_for_mfid(
    const std::vector<Tensor>& gen, const std::vector<Tensor>& real,
    const std::vector<int>& labels) {
    std::map<int, std::vector<Tensor>> g, r;
    for (std::size_t i = 0; i < gen.size(); ++i) {
        g[labels[i]].push_back(gen[i]);
        r[labels[i]].push_back(real[i]);
    }
    std::map<int, std::vector<Tensor>> gk, rk;
    for (auto& [cls, v] : g)
        if (v.size() >= 2 && r[cls].size() >= 2) {
            gk[cls] = v;
            rk[cls] = r[cls];
        }
    if (gk.empty()) {
        gk[0] = gen;
        rk[0] = real;
    }
    return {std::move(gk), std::move(rk)};
}

}  // namespace

MetricsReport compute_metrics(const std::vector<Tensor>& generated,
                              const std::vector<Tensor>& ground_truths,
                              const std::vector<int>& font_labels,
                              const std::vector<int>& char_labels,
                              const EvalClassifier& style_classifier,
                              const EvalClassifier& content_classifier, CharSet char_set) {
    if (generated.empty()) throw EmptyInput("compute_metrics with no images");
    MetricsReport rep;
    rep.split = char_set == CharSet::seen ? "seen" : "unseen";

    double s = 0.0;
    for (std::size_t i = 0; i < generated.size(); ++i)
        s += ssim(from_model_space(generated[i]), from_model_space(ground_truths[i]));
    rep.ssim = s / static_cast<double>(generated.size());

    rep.acc_style = top1_accuracy(style_classifier, generated, font_labels);
    rep.acc_content = top1_accuracy(content_classifier, generated, char_labels);

    auto [gs, rs] = group_for_mfid(generated, ground_truths, font_labels);
    rep.mfid_style = mfid(style_classifier, gs, rs);
    auto [gc, rc] = group_for_mfid(generated, ground_truths, char_labels);
    rep.mfid_content = mfid(content_classifier, gc, rc);
    return rep;
}

namespace {

std::vector<Tensor> pick_references(const Corpus& corpus, const DatasetSplit& split, int font,
                                    int target_char, int k) {
    std::vector<Tensor> refs;
    for (int c : split.train_chars) {
        if (c == target_char) continue;
        refs.push_back(to_model_space(corpus.glyph(font, c)));
        if (static_cast<int>(refs.size()) == k) break;
    }
    // font pool too small: allow the target char itself
    if (static_cast<int>(refs.size()) < k)
        for (int c : split.train_chars) {
            refs.push_back(to_model_space(corpus.glyph(font, c)));
            if (static_cast<int>(refs.size()) == k) break;
        }
    if (refs.empty()) throw InsufficientItems("no reference glyphs available");
    return refs;
}

}  // namespace

MetricsReport evaluate(const ModelAssembly& model, const Corpus& corpus,
                       const DatasetSplit& split, CharSet char_set, int k_references,
                       int content_font_id, const EvalClassifier& style_classifier,
                       const EvalClassifier& content_classifier) {
    const std::vector<int>& chars =
        char_set == CharSet::seen ? split.train_chars : split.test_chars;
    if (split.test_fonts.empty() || chars.empty())
        throw InsufficientItems("evaluate needs test fonts and a non-empty char set");

    std::vector<Tensor> gen, gt;
    std::vector<int> font_labels, char_labels;
    for (int font : split.test_fonts) {
        for (int chr : chars) {
            const std::vector<Tensor> refs =
                pick_references(corpus, split, font, chr, k_references);
            gen.push_back(
                model.synthesize(to_model_space(corpus.glyph(content_font_id, chr)), refs));
            gt.push_back(to_model_space(corpus.glyph(font, chr)));
            font_labels.push_back(font);
            char_labels.push_back(chr);
        }
    }
    return compute_metrics(gen, gt, font_labels, char_labels, style_classifier,
                           content_classifier, char_set);
}

void emit_sample_grid(const ModelAssembly& model, const Corpus& corpus,
                      const DatasetSplit& split, const std::vector<int>& fonts,
                      const std::vector<int>& chars, int k_references, int content_font_id,
                      const std::string& path) {
    if (chars.empty() || fonts.empty()) throw EmptyInput("emit_sample_grid needs fonts and chars");
    const int res = corpus.resolution();
    Tensor grid({static_cast<int>(fonts.size()) * 2 * res, static_cast<int>(chars.size()) * res});
    grid.fill(1.0);

    auto blit = [&](const Tensor& tile, int row, int col) {
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                grid.v[static_cast<std::size_t>(row * res + y) * grid.shape[1] + col * res + x] =
                    tile.v[static_cast<std::size_t>(y) * res + x];
    };

    for (std::size_t f = 0; f < fonts.size(); ++f) {
        for (std::size_t c = 0; c < chars.size(); ++c) {
            const std::vector<Tensor> refs =
                pick_references(corpus, split, fonts[f], chars[c], k_references);
            const Tensor y = model.synthesize(
                to_model_space(corpus.glyph(content_font_id, chars[c])), refs);
            blit(from_model_space(y), static_cast<int>(2 * f), static_cast<int>(c));
            blit(corpus.glyph(fonts[f], chars[c]).pixels, static_cast<int>(2 * f + 1),
                 static_cast<int>(c));
        }
    }
    write_gray_png(path, grid);
}

}  // namespace fontnet
