// fontnet command-line driver: synthetic corpus generation, split
// preparation, training, inference, evaluation, and ablation runs.
//
// Exit codes: 0 success, 2 usage/config/IO error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fontnet/dataset.hpp"
#include "fontnet/evaluation.hpp"
#include "fontnet/image.hpp"
#include "fontnet/png_io.hpp"
#include "fontnet/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fontnet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

std::uint64_t env_seed_fallback(std::uint64_t seed, bool seed_given) {
    if (seed_given) return seed;
    if (const char* env = std::getenv("FONTNET_SEED")) return std::strtoull(env, nullptr, 10);
    return seed;
}

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw Error("unknown key \"" + it.key() + "\" in " + where);
}

struct RunConfig {
    TrainConfig train;
    // dataset
    std::string dataset_kind = "synthetic";  // synthetic | prerendered
    int n_fonts = 4;
    int n_chars = 40;
    std::uint64_t dataset_seed = 1;
    std::string dataset_root;
    // split
    double font_train_frac = 0.75;
    int n_train_chars = 30;
    std::uint64_t split_seed = 1;
    std::string split_manifest;
    std::string out_dir = "run";

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IOError("cannot read config " + path);
        json j = json::parse(in);
        require_keys(j, {"train", "dataset", "split", "out_dir"}, path);

        RunConfig rc;
        if (j.contains("train")) {
            require_keys(j.at("train"),
                         {"resolution", "embedding_dim", "style_dim", "base_channels",
                          "max_channels", "batch_size", "k_references", "steps", "lr_g", "lr_d",
                          "lr_sep", "beta1", "beta2", "r1_gamma", "margin_alpha", "lambda_l1",
                          "lambda_gstyle", "lambda_encstyle", "seed", "ablation",
                          "content_font_id", "checkpoint_every"},
                         "train section");
            rc.train = TrainConfig::from_json(j.at("train").dump());
        }
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            require_keys(d, {"kind", "n_fonts", "n_chars", "seed", "root"}, "dataset section");
            if (d.contains("kind")) rc.dataset_kind = d.at("kind").get<std::string>();
            if (d.contains("n_fonts")) rc.n_fonts = d.at("n_fonts").get<int>();
            if (d.contains("n_chars")) rc.n_chars = d.at("n_chars").get<int>();
            if (d.contains("seed")) rc.dataset_seed = d.at("seed").get<std::uint64_t>();
            if (d.contains("root")) rc.dataset_root = d.at("root").get<std::string>();
            if (rc.dataset_kind != "synthetic" && rc.dataset_kind != "prerendered")
                throw Error("dataset.kind must be synthetic or prerendered");
        }
        if (j.contains("split")) {
            const json& s = j.at("split");
            require_keys(s, {"font_train_frac", "n_train_chars", "seed", "manifest"},
                         "split section");
            if (s.contains("font_train_frac"))
                rc.font_train_frac = s.at("font_train_frac").get<double>();
            if (s.contains("n_train_chars")) rc.n_train_chars = s.at("n_train_chars").get<int>();
            if (s.contains("seed")) rc.split_seed = s.at("seed").get<std::uint64_t>();
            if (s.contains("manifest")) rc.split_manifest = s.at("manifest").get<std::string>();
        }
        if (j.contains("out_dir")) rc.out_dir = j.at("out_dir").get<std::string>();
        return rc;
    }

    Corpus make_corpus() const {
        if (dataset_kind == "prerendered") {
            auto [fonts, codepoints] = load_prerendered_corpus(dataset_root);
            return Corpus(std::move(fonts), static_cast<int>(codepoints.size()),
                          train.resolution);
        }
        return Corpus::synthetic(n_fonts, n_chars, train.resolution, dataset_seed);
    }

    DatasetSplit make_split(const Corpus& corpus) const {
        if (!split_manifest.empty()) return load_split(split_manifest);
        std::vector<int> chars(corpus.n_chars());
        for (int i = 0; i < corpus.n_chars(); ++i) chars[i] = i;
        return build_split(corpus.n_fonts(), font_train_frac, chars, n_train_chars, split_seed);
    }
};

int cmd_synth_data(int n_fonts, int n_chars, const std::string& out_dir, std::uint64_t seed,
                   int resolution) {
    const Corpus corpus = Corpus::synthetic(n_fonts, n_chars, resolution, seed);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    long written = 0;
    for (int f = 0; f < n_fonts; ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "font_%03d", f);
        const fs::path dir = fs::path(out_dir) / name;
        fs::create_directories(dir, ec);
        if (ec) {
            std::cerr << "error: cannot create " << dir << "\n";
            return kExitUsage;
        }
        for (int c = 0; c < n_chars; ++c) {
            write_gray_png((dir / (std::to_string(c) + ".png")).string(),
                           corpus.glyph(f, c).pixels);
            ++written;
        }
    }
    std::cout << "wrote " << written << " glyphs (" << n_fonts << " fonts x " << n_chars
              << " chars, " << resolution << "x" << resolution << ") to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path,
              const std::function<void(TrainConfig&)>& apply_overrides) {
    RunConfig rc = RunConfig::load(config_path);
    apply_overrides(rc.train);
    rc.train.validate();

    const Corpus corpus = rc.make_corpus();
    const DatasetSplit split = rc.make_split(corpus);
    fs::create_directories(rc.out_dir);
    save_split(split, rc.out_dir + "/split.json");
    {
        std::ofstream cfg_out(rc.out_dir + "/train_config.json");
        cfg_out << rc.train.to_json() << "\n";
    }

    Trainer trainer(rc.train, corpus, split);
    trainer.diag_dir = rc.out_dir;
    std::ofstream log(rc.out_dir + "/train_log.jsonl");
    while (trainer.step_count() < rc.train.steps) {
        trainer.run(std::min(trainer.step_count() + rc.train.checkpoint_every, rc.train.steps),
                    &log);
        trainer.save_checkpoint(rc.out_dir + "/ckpt_latest.ckpt");
        std::cout << "step " << trainer.step_count() << "/" << rc.train.steps << "\n";
    }
    trainer.save_checkpoint(rc.out_dir + "/ckpt_final.ckpt");
    std::cout << "done; checkpoints + log in " << rc.out_dir << "\n";
    return 0;
}

Trainer load_run(const RunConfig& rc, const Corpus& corpus, const std::string& checkpoint) {
    const std::string path = !checkpoint.empty()           ? checkpoint
                             : fs::exists(rc.out_dir + "/ckpt_final.ckpt")
                                 ? rc.out_dir + "/ckpt_final.ckpt"
                                 : rc.out_dir + "/ckpt_latest.ckpt";
    return Trainer::load_checkpoint(path, corpus, load_split(rc.out_dir + "/split.json"));
}

int cmd_synthesize(const std::string& config_path, const std::string& checkpoint, int source_char,
                   const std::string& reference_dir, int k, const std::string& out_path) {
    RunConfig rc = RunConfig::load(config_path);
    const Corpus corpus = rc.make_corpus();
    Trainer trainer = load_run(rc, corpus, checkpoint);

    std::vector<Tensor> refs;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(reference_dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        refs.push_back(to_model_space(read_gray_png(p.string())));
        if (static_cast<int>(refs.size()) == k) break;
    }
    if (refs.empty()) {
        std::cerr << "error: no reference PNGs in " << reference_dir << "\n";
        return kExitUsage;
    }
    if (static_cast<int>(refs.size()) < k)
        std::cerr << "warning: only " << refs.size() << " of " << k
                  << " requested references available\n";

    const Tensor src =
        to_model_space(corpus.glyph(trainer.content_font_id(), source_char));
    const Tensor y = trainer.model().synthesize(src, refs);
    write_gray_png(out_path, from_model_space(y));
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint,
                 const std::string& split_manifest, const std::string& char_set,
                 const std::string& out_json) {
    RunConfig rc = RunConfig::load(config_path);
    if (!split_manifest.empty()) rc.split_manifest = split_manifest;
    const Corpus corpus = rc.make_corpus();
    Trainer trainer = load_run(rc, corpus, checkpoint);
    const DatasetSplit& split = trainer.split();

    std::vector<int> all_fonts(corpus.n_fonts()), all_chars(corpus.n_chars());
    for (int i = 0; i < corpus.n_fonts(); ++i) all_fonts[i] = i;
    for (int i = 0; i < corpus.n_chars(); ++i) all_chars[i] = i;
    const EvalClassifier style_clf = train_eval_classifier(
        corpus, all_fonts, all_chars, LabelKind::style, rc.train.seed + 101);
    const EvalClassifier content_clf = train_eval_classifier(
        corpus, all_fonts, all_chars, LabelKind::content, rc.train.seed + 202);

    const CharSet cs = char_set == "unseen" ? CharSet::unseen : CharSet::seen;
    const MetricsReport rep =
        evaluate(trainer.model(), corpus, split, cs, rc.train.k_references,
                 trainer.content_font_id(), style_clf, content_clf);
    std::ofstream out(out_json);
    out << rep.to_json() << "\n";
    std::cout << rep.to_table();
    return 0;
}

int cmd_ablate(const std::string& config_path) {
    RunConfig rc = RunConfig::load(config_path);
    const Corpus corpus = rc.make_corpus();
    const DatasetSplit split = rc.make_split(corpus);
    fs::create_directories(rc.out_dir);

    std::vector<int> all_fonts(corpus.n_fonts()), all_chars(corpus.n_chars());
    for (int i = 0; i < corpus.n_fonts(); ++i) all_fonts[i] = i;
    for (int i = 0; i < corpus.n_chars(); ++i) all_chars[i] = i;
    const EvalClassifier style_clf = train_eval_classifier(
        corpus, all_fonts, all_chars, LabelKind::style, rc.train.seed + 101);
    const EvalClassifier content_clf = train_eval_classifier(
        corpus, all_fonts, all_chars, LabelKind::content, rc.train.seed + 202);

    std::cout << "variant         SSIM    mFID(C)  Acc(C)  mFID(S)  Acc(S)\n";
    for (AblationVariant v : {AblationVariant::full, AblationVariant::no_separator,
                              AblationVariant::plain_decoder}) {
        TrainConfig cfg = rc.train;
        cfg.ablation = v;
        Trainer trainer(cfg, corpus, split);
        std::ofstream log(rc.out_dir + "/train_log_" + to_string(v) + ".jsonl");
        trainer.run(cfg.steps, &log);
        trainer.save_checkpoint(rc.out_dir + "/ckpt_" + to_string(v) + ".ckpt");
        const MetricsReport rep =
            evaluate(trainer.model(), corpus, split, CharSet::unseen, cfg.k_references,
                     trainer.content_font_id(), style_clf, content_clf);
        std::printf("%-14s  %.4f  %7.3f  %6.2f  %7.3f  %6.2f\n", to_string(v).c_str(), rep.ssim,
                    rep.mfid_content, rep.acc_content, rep.mfid_style, rep.acc_style);
    }
    return 0;
}

int cmd_grid(const std::string& config_path, const std::string& checkpoint,
             std::vector<int> fonts, std::vector<int> chars, const std::string& out_path) {
    RunConfig rc = RunConfig::load(config_path);
    const Corpus corpus = rc.make_corpus();
    Trainer trainer = load_run(rc, corpus, checkpoint);
    if (fonts.empty()) fonts = trainer.split().test_fonts;
    if (chars.empty()) chars = trainer.split().test_chars;
    emit_sample_grid(trainer.model(), corpus, trainer.split(), fonts, chars,
                     rc.train.k_references, trainer.content_font_id(), out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FontNet: few-shot font synthesis via style separation"};
    app.require_subcommand(1);

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "emit a pre-rendered synthetic glyph corpus");
    int sd_fonts = 4, sd_chars = 40, sd_res = 128;
    std::uint64_t sd_seed = 1;
    std::string sd_out;
    bool sd_seed_given = false;
    synth->add_option("--n-fonts", sd_fonts);
    synth->add_option("--n-chars", sd_chars);
    synth->add_option("--resolution", sd_res);
    synth->add_option("--seed", sd_seed)->each([&](const std::string&) { sd_seed_given = true; });
    synth->add_option("--out", sd_out)->required();

    // prepare-split
    auto* prep = app.add_subcommand("prepare-split", "write a split manifest");
    int ps_fonts = 4, ps_chars = 40, ps_train_chars = 30;
    double ps_frac = 0.75;
    std::uint64_t ps_seed = 1;
    bool ps_seed_given = false;
    std::string ps_out;
    prep->add_option("--n-fonts", ps_fonts);
    prep->add_option("--n-chars", ps_chars);
    prep->add_option("--n-train-chars", ps_train_chars);
    prep->add_option("--font-train-frac", ps_frac);
    prep->add_option("--seed", ps_seed)->each([&](const std::string&) { ps_seed_given = true; });
    prep->add_option("--out", ps_out)->required();

    // train (+ overrides)
    auto* train = app.add_subcommand("train", "run the training loop from a JSON config");
    std::string tr_config;
    train->add_option("--config", tr_config)->required();
    std::optional<long> ov_steps;
    std::optional<int> ov_batch, ov_k, ov_res;
    std::optional<double> ov_r1, ov_alpha, ov_l1w;
    std::optional<std::uint64_t> ov_seed;
    std::optional<std::string> ov_ablation;
    train->add_option("--steps", ov_steps);
    train->add_option("--batch-size", ov_batch);
    train->add_option("--k-references", ov_k);
    train->add_option("--resolution", ov_res);
    train->add_option("--r1-gamma", ov_r1);
    train->add_option("--margin-alpha", ov_alpha);
    train->add_option("--lambda-l1", ov_l1w);
    train->add_option("--seed", ov_seed);
    train->add_option("--ablation", ov_ablation);

    // synthesize
    auto* syn = app.add_subcommand("synthesize", "synthesize one glyph from references");
    std::string sy_config, sy_ckpt, sy_refdir, sy_out;
    int sy_char = 0, sy_k = 8;
    syn->add_option("--config", sy_config)->required();
    syn->add_option("--checkpoint", sy_ckpt);
    syn->add_option("--source-char", sy_char)->required();
    syn->add_option("--reference-dir", sy_refdir)->required();
    syn->add_option("--k-references", sy_k);
    syn->add_option("--out", sy_out)->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "compute the metric suite");
    std::string ev_config, ev_ckpt, ev_split, ev_charset = "seen", ev_out = "metrics.json";
    ev->add_option("--config", ev_config)->required();
    ev->add_option("--checkpoint", ev_ckpt);
    ev->add_option("--split-manifest", ev_split);
    ev->add_option("--char-set", ev_charset)->check(CLI::IsMember({"seen", "unseen"}));
    ev->add_option("--out-json", ev_out);

    // ablate
    auto* ab = app.add_subcommand("ablate", "train and evaluate all three variants");
    std::string ab_config;
    ab->add_option("--config", ab_config)->required();

    // grid
    auto* gr = app.add_subcommand("grid", "emit a generated-vs-GT sample grid PNG");
    std::string gr_config, gr_ckpt, gr_out;
    std::vector<int> gr_fonts, gr_chars;
    gr->add_option("--config", gr_config)->required();
    gr->add_option("--checkpoint", gr_ckpt);
    gr->add_option("--fonts", gr_fonts);
    gr->add_option("--chars", gr_chars);
    gr->add_option("--out", gr_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth_data(sd_fonts, sd_chars, sd_out,
                                  env_seed_fallback(sd_seed, sd_seed_given), sd_res);
        if (prep->parsed()) {
            std::vector<int> chars(ps_chars);
            for (int i = 0; i < ps_chars; ++i) chars[i] = i;
            save_split(build_split(ps_fonts, ps_frac, chars, ps_train_chars,
                                   env_seed_fallback(ps_seed, ps_seed_given)),
                       ps_out);
            std::cout << "wrote " << ps_out << "\n";
            return 0;
        }
        if (train->parsed())
            return cmd_train(tr_config, [&](TrainConfig& c) {
                if (ov_steps) c.steps = *ov_steps;
                if (ov_batch) c.batch_size = *ov_batch;
                if (ov_k) c.k_references = *ov_k;
                if (ov_res) c.resolution = *ov_res;
                if (ov_r1) c.r1_gamma = *ov_r1;
                if (ov_alpha) c.margin_alpha = *ov_alpha;
                if (ov_l1w) c.weights.lambda_l1 = *ov_l1w;
                if (ov_seed) c.seed = *ov_seed;
                if (ov_ablation) c.ablation = ablation_from_string(*ov_ablation);
            });
        if (syn->parsed())
            return cmd_synthesize(sy_config, sy_ckpt, sy_char, sy_refdir, sy_k, sy_out);
        if (ev->parsed()) return cmd_evaluate(ev_config, ev_ckpt, ev_split, ev_charset, ev_out);
        if (ab->parsed()) return cmd_ablate(ab_config);
        if (gr->parsed()) return cmd_grid(gr_config, gr_ckpt, gr_fonts, gr_chars, gr_out);
    } catch (const NonFiniteLoss& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
