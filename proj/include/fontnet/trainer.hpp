#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "fontnet/dataset.hpp"
#include "fontnet/discriminator.hpp"
#include "fontnet/generator.hpp"
#include "fontnet/net_config.hpp"
#include "fontnet/objectives.hpp"
#include "fontnet/separator.hpp"

namespace fontnet {

enum class AblationVariant { full, no_separator, plain_decoder };

std::string to_string(AblationVariant v);
AblationVariant ablation_from_string(const std::string& s);

struct TrainConfig {
    int resolution = 128;
    int embedding_dim = 128;
    int style_dim = 256;
    int base_channels = 32;
    int max_channels = 512;
    int batch_size = 8;
    int k_references = 8;
    long steps = 2000;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    double lr_sep = 2e-4;
    double beta1 = 0.0;
    double beta2 = 0.99;
    double r1_gamma = 1.0;
    double margin_alpha = 0.2;
    LossWeights weights;
    std::uint64_t seed = 0;
    AblationVariant ablation = AblationVariant::full;
    // -1 selects the first (lowest-id) train font as the canonical content font
    int content_font_id = -1;
    long checkpoint_every = 500;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// The networks for one ablation variant. In `no_separator` the triplet-trained
// separator is replaced by a style encoder trained jointly through the
// generator losses; in `plain_decoder` the AdaIN decoder is replaced by a
// concatenation-at-bottleneck decoder.
struct ModelAssembly {
    AblationVariant variant = AblationVariant::full;
    NetConfig net;
    std::unique_ptr<Separator> separator;      // full, plain_decoder
    std::unique_ptr<Separator> style_encoder;  // no_separator
    std::unique_ptr<Generator> generator;
    std::unique_ptr<PlainDecoder> plain_decoder;  // plain_decoder
    std::unique_ptr<Discriminator> discriminator;

    // style provider for x^s (separator or style encoder, depending on variant)
    const Separator& style_net() const { return separator ? *separator : *style_encoder; }
    Separator& style_net() { return separator ? *separator : *style_encoder; }

    // full inference path on [-1,1] tensors
    Tensor synthesize(const Tensor& source, const std::vector<Tensor>& references) const;

    nn::ParamList generator_side_params();  // everything updated in the G step
    nn::ParamList discriminator_params();
    nn::ParamList all_params();
};

ModelAssembly build_ablation(const TrainConfig& cfg, int n_fonts, int n_chars);

class Trainer {
public:
    Trainer(const TrainConfig& cfg, const Corpus& corpus, DatasetSplit split);

    // One D-then-G update on freshly sampled data. Throws NonFiniteLoss (after
    // dumping a diagnostic checkpoint next to `diag_dir` if non-empty).
    LossReport step();

    // Runs until step_count() == until_step, appending one JSON line per step.
    void run(long until_step, std::ostream* log = nullptr);

    void save_checkpoint(const std::string& path) const;
    static Trainer load_checkpoint(const std::string& path, const Corpus& corpus,
                                   DatasetSplit split);

    long step_count() const { return step_; }
    const TrainConfig& config() const { return cfg_; }
    ModelAssembly& model() { return model_; }
    const ModelAssembly& model() const { return model_; }
    int content_font_id() const { return content_font_; }
    const DatasetSplit& split() const { return split_; }
    Rng& rng() { return rng_; }
    std::string diag_dir;

private:
    LossReport train_step(const GeneratorBatch& batch, const std::vector<Triplet>& triplets);

    TrainConfig cfg_;
    const Corpus* corpus_;
    DatasetSplit split_;
    int content_font_;
    ModelAssembly model_;
    nn::Adam opt_g_, opt_d_, opt_sep_;
    Rng rng_;
    long step_ = 0;

    friend struct CheckpointCodec;
};

}  // namespace fontnet
