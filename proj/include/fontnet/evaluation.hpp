#pragma once

#include <map>
#include <string>
#include <vector>

#include "fontnet/dataset.hpp"
#include "fontnet/nn.hpp"
#include "fontnet/trainer.hpp"

namespace fontnet {

// Mean local SSIM, Gaussian window 11 / sigma 1.5, K1=0.01 K2=0.03 L=1.
// Inputs are [0,1] HxW rasters.
double ssim(const Tensor& a, const Tensor& b);

enum class LabelKind { content, style };

// Small conv classifier used for Acc and mFID. The 64-dim penultimate
// activation is the FID feature space.
class EvalClassifier {
public:
    EvalClassifier(int resolution, LabelKind kind, std::vector<int> class_ids);

    void init(Rng& rng);

    LabelKind kind() const { return kind_; }
    const std::vector<int>& classes() const { return classes_; }
    int class_index(int raw_id) const;

    Tensor logits(const Tensor& image) const;    // image in [-1,1], 1xHxW
    Tensor features(const Tensor& image) const;  // penultimate, 64-dim
    int predict(const Tensor& image) const;      // raw class id

    // one CE step; returns the loss
    double train_step(const Tensor& image, int raw_label, nn::Adam& opt);

    nn::ParamList params();

private:
    struct Forward;
    Forward forward(const Tensor& image, bool keep) const;

    int resolution_;
    LabelKind kind_;
    std::vector<int> classes_;
    double slope_ = 0.2;
    std::vector<nn::Conv2d> convs_;
    nn::Linear feat_;  // trunk channels -> 64
    nn::Linear head_;  // 64 -> |classes|
};

// Trains a classifier over the full (fonts x chars) grid of the corpus.
EvalClassifier train_eval_classifier(const Corpus& corpus, const std::vector<int>& fonts,
                                     const std::vector<int>& chars, LabelKind kind,
                                     std::uint64_t seed, int epochs = 40);

// images in [-1,1] model space; labels are raw class ids. Returns percent.
double top1_accuracy(const EvalClassifier& classifier, const std::vector<Tensor>& images,
                     const std::vector<int>& labels);

struct GaussianStats {
    Tensor mean;  // (d)
    Tensor cov;   // (d, d), unbiased
};

GaussianStats fit_gaussian(const std::vector<Tensor>& samples);

double frechet_distance(const Tensor& mu1, const Tensor& cov1, const Tensor& mu2,
                        const Tensor& cov2);

// Per-class FID on classifier features, averaged over classes. Every class
// needs >= 2 samples per side.
double mfid(const EvalClassifier& classifier, const std::map<int, std::vector<Tensor>>& generated,
            const std::map<int, std::vector<Tensor>>& real);

struct MetricsReport {
    double ssim = 0.0;
    double mfid_content = 0.0;
    double acc_content = 0.0;
    double mfid_style = 0.0;
    double acc_style = 0.0;
    std::string split;  // "seen" | "unseen"

    std::string to_json() const;
    std::string to_table() const;
};

enum class CharSet { seen, unseen };

// Shared metric computation over aligned generated/ground-truth lists.
MetricsReport compute_metrics(const std::vector<Tensor>& generated,
                              const std::vector<Tensor>& ground_truths,
                              const std::vector<int>& font_labels,
                              const std::vector<int>& char_labels,
                              const EvalClassifier& style_classifier,
                              const EvalClassifier& content_classifier, CharSet char_set);

// Benchmark protocol: for each test font and each character of the chosen set,
// synthesize from the content font with k references of the test font.
MetricsReport evaluate(const ModelAssembly& model, const Corpus& corpus,
                       const DatasetSplit& split, CharSet char_set, int k_references,
                       int content_font_id, const EvalClassifier& style_classifier,
                       const EvalClassifier& content_classifier);

// Qualitative sample grid: per font one generated row and one ground-truth row,
// one column per character.
void emit_sample_grid(const ModelAssembly& model, const Corpus& corpus,
                      const DatasetSplit& split, const std::vector<int>& fonts,
                      const std::vector<int>& chars, int k_references, int content_font_id,
                      const std::string& path);

}  // namespace fontnet
