#include "fontnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fontnet/errors.hpp"
#include "fontnet/png_io.hpp"

namespace fontnet {

namespace fs = std::filesystem;
using json = nlohmann::json;

// --- synthetic fonts ----------------------------------------------------------

void SyntheticStyleParams::validate() const {
    if (!(stroke_thickness > 0.0 && stroke_thickness <= 1.0))
        throw ParamOutOfRange("stroke_thickness must be in (0,1]");
    if (!(slant >= -0.5 && slant <= 0.5)) throw ParamOutOfRange("slant must be in [-0.5,0.5]");
    if (!(serif_length >= 0.0)) throw ParamOutOfRange("serif_length must be >= 0");
    if (!(corner_roundness >= 0.0 && corner_roundness <= 1.0))
        throw ParamOutOfRange("corner_roundness must be in [0,1]");
    if (!(contrast >= 0.0 && contrast <= 1.0)) throw ParamOutOfRange("contrast must be in [0,1]");
}

const std::vector<std::vector<Stroke>>& pseudo_alphabet() {
    static const std::vector<std::vector<Stroke>> alphabet = [] {
        std::vector<std::vector<Stroke>> chars;
        std::set<std::vector<std::pair<int, int>>> seen;
        Rng rng(0xF047C0DEULL);
        while (static_cast<int>(chars.size()) < kPseudoAlphabetSize) {
            const int n_strokes = 2 + static_cast<int>(rng.uniform_index(4));
            std::vector<Stroke> strokes;
            std::set<std::pair<int, int>> used;
            while (static_cast<int>(strokes.size()) < n_strokes) {
                int a = static_cast<int>(rng.uniform_index(9));
                int b = static_cast<int>(rng.uniform_index(9));
                if (a == b) continue;
                auto key = std::minmax(a, b);
                if (used.count(key)) continue;
                used.insert(key);
                strokes.push_back({a, b, rng.uniform_index(2) ? 1 : -1});
            }
            std::vector<std::pair<int, int>> sig(used.begin(), used.end());
            if (seen.count(sig)) continue;  // identical stroke set -> same shape
            seen.insert(sig);
            chars.push_back(std::move(strokes));
        }
        return chars;
    }();
    return alphabet;
}

namespace {

struct Segment {
    double x0, y0, x1, y1;
    double radius;
};

double point_segment_distance(double px, double py, const Segment& s) {
    const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
    const double wx = px - s.x0, wy = py - s.y0;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    const double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

// Builds the segment soup for one character of one synthetic font.
std::vector<Segment> build_char_segments(const SyntheticStyleParams& p, std::uint64_t seed,
                                         int char_id) {
    const auto& strokes = pseudo_alphabet().at(char_id);
    Rng jitter_rng(seed * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(char_id + 1));

    // 3x3 lattice in the unit square, jittered per (font seed, char)
    double ax[9], ay[9];
    for (int i = 0; i < 9; ++i) {
        ax[i] = 0.22 + 0.28 * (i % 3) + jitter_rng.uniform(-0.02, 0.02);
        ay[i] = 0.22 + 0.28 * (i / 3) + jitter_rng.uniform(-0.02, 0.02);
    }
    const double shear = std::tan(p.slant);
    auto place = [&](double x, double y) {
        return std::pair<double, double>{x + shear * (0.5 - y), y};
    };

    const double base_radius = 0.02 + 0.08 * p.stroke_thickness;
    std::vector<Segment> segs;

    for (const Stroke& st : strokes) {
        auto [x0, y0] = place(ax[st.a], ay[st.a]);
        auto [x1, y1] = place(ax[st.b], ay[st.b]);
        const double dx = x1 - x0, dy = y1 - y0;
        const double len = std::sqrt(dx * dx + dy * dy);
        if (len < 1e-9) continue;

        // typographic contrast: vertical strokes thicken, horizontal thin out
        const double angle_w = (std::abs(dy) - std::abs(dx)) / (std::abs(dx) + std::abs(dy));
        const double radius = base_radius * std::max(0.35, 1.0 + 0.8 * p.contrast * angle_w);

        // corner_roundness bows the stroke into a quadratic arc
        const double bow = 0.35 * p.corner_roundness * len * st.bow_sign;
        const double px = -dy / len, py = dx / len;
        const double cx = 0.5 * (x0 + x1) + bow * px;
        const double cy = 0.5 * (y0 + y1) + bow * py;
        const int n_sub = p.corner_roundness > 0.0 ? 16 : 1;
        double qx = x0, qy = y0;
        for (int i = 1; i <= n_sub; ++i) {
            const double t = static_cast<double>(i) / n_sub;
            const double u = 1.0 - t;
            const double nx = u * u * x0 + 2.0 * u * t * cx + t * t * x1;
            const double ny = u * u * y0 + 2.0 * u * t * cy + t * t * y1;
            segs.push_back({qx, qy, nx, ny, radius});
            qx = nx;
            qy = ny;
        }

        // serifs: perpendicular caps at both stroke endpoints
        if (p.serif_length > 0.0) {
            const double half = 0.12 * std::min(p.serif_length, 2.0);
            const double sr = 0.6 * base_radius;
            segs.push_back({x0 - half * px, y0 - half * py, x0 + half * px, y0 + half * py, sr});
            segs.push_back({x1 - half * px, y1 - half * py, x1 + half * px, y1 + half * py, sr});
        }
    }
    return segs;
}

Tensor render_synthetic(const SyntheticStyleParams& p, std::uint64_t seed, int char_id,
                        int resolution) {
    const auto segs = build_char_segments(p, seed, char_id);
    const double aa = 1.5 / resolution;
    const double ink_level = 0.45 * (1.0 - p.contrast);

    Tensor img({resolution, resolution});
    for (int y = 0; y < resolution; ++y) {
        const double fy = (y + 0.5) / resolution;
        for (int x = 0; x < resolution; ++x) {
            const double fx = (x + 0.5) / resolution;
            double d = 1e9;
            for (const Segment& s : segs)
                d = std::min(d, point_segment_distance(fx, fy, s) - s.radius);
            double v = 0.5 + d / aa;  // signed distance -> edge coverage
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            img.v[static_cast<std::size_t>(y) * resolution + x] =
                ink_level + (1.0 - ink_level) * v;
        }
    }
    return img;
}

}  // namespace

SyntheticFontSource::SyntheticFontSource(SyntheticStyleParams params, std::uint64_t seed)
    : params_(params), seed_(seed) {
    params_.validate();
}

bool SyntheticFontSource::has_glyph(int char_id) const {
    return char_id >= 0 && char_id < kPseudoAlphabetSize;
}

Tensor SyntheticFontSource::render(int char_id, int resolution) const {
    return render_synthetic(params_, seed_, char_id, resolution);
}

std::string SyntheticFontSource::name() const {
    return "synthetic_" + std::to_string(seed_);
}

std::unique_ptr<FontSource> generate_synthetic_font(const SyntheticStyleParams& params,
                                                    std::uint64_t seed) {
    return std::make_unique<SyntheticFontSource>(params, seed);
}

GlyphImage render_glyph(const FontSource& font, int font_id, int char_id, int resolution) {
    if (resolution < 32) throw BadResolution("resolution must be >= 32");
    if (!font.has_glyph(char_id))
        throw MissingGlyph("font " + font.name() + " lacks char " + std::to_string(char_id));
    GlyphImage img;
    img.pixels = font.render(char_id, resolution);
    img.font_id = font_id;
    img.char_id = char_id;
    return img;
}

// --- pre-rendered corpus --------------------------------------------------------

PrerenderedFontSource::PrerenderedFontSource(std::string dir, std::string font_name,
                                             std::map<int, std::string> files_by_char)
    : dir_(std::move(dir)), font_name_(std::move(font_name)),
      files_by_char_(std::move(files_by_char)) {}

bool PrerenderedFontSource::has_glyph(int char_id) const {
    return files_by_char_.count(char_id) > 0;
}

Tensor PrerenderedFontSource::render(int char_id, int resolution) const {
    auto it = files_by_char_.find(char_id);
    if (it == files_by_char_.end())
        throw MissingGlyph(font_name_ + " lacks char " + std::to_string(char_id));
    Tensor img = read_gray_png(it->second);
    if (img.shape[0] != resolution || img.shape[1] != resolution)
        throw BadResolution("pre-rendered glyph side " + std::to_string(img.shape[0]) +
                            " != configured resolution " + std::to_string(resolution));
    return img;
}

std::pair<std::vector<std::unique_ptr<FontSource>>, std::vector<int>> load_prerendered_corpus(
    const std::string& root) {
    if (!fs::is_directory(root)) throw IOError("corpus root not found: " + root);

    std::vector<std::string> font_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) font_dirs.push_back(e.path().filename().string());
    std::sort(font_dirs.begin(), font_dirs.end());

    // corpus-wide codepoint registry
    std::set<int> codepoints;
    std::vector<std::map<int, std::string>> per_font_files(font_dirs.size());
    for (std::size_t f = 0; f < font_dirs.size(); ++f) {
        for (const auto& e : fs::directory_iterator(fs::path(root) / font_dirs[f])) {
            if (e.path().extension() != ".png") continue;
            try {
                const int cp = std::stoi(e.path().stem().string());
                codepoints.insert(cp);
                per_font_files[f][cp] = e.path().string();
            } catch (const std::exception&) {
                // non-numeric filename, skip
            }
        }
    }
    std::vector<int> cps(codepoints.begin(), codepoints.end());
    std::map<int, int> cp_to_id;
    for (std::size_t i = 0; i < cps.size(); ++i) cp_to_id[cps[i]] = static_cast<int>(i);

    std::vector<std::unique_ptr<FontSource>> fonts;
    for (std::size_t f = 0; f < font_dirs.size(); ++f) {
        std::map<int, std::string> by_char;
        for (auto& [cp, path] : per_font_files[f]) by_char[cp_to_id[cp]] = path;
        fonts.push_back(
            std::make_unique<PrerenderedFontSource>(root, font_dirs[f], std::move(by_char)));
    }
    return {std::move(fonts), std::move(cps)};
}

// --- corpus ----------------------------------------------------------------------

Corpus::Corpus(std::vector<std::unique_ptr<FontSource>> fonts, int n_chars, int resolution)
    : fonts_(std::move(fonts)), n_chars_(n_chars), resolution_(resolution) {}

Corpus Corpus::synthetic(int n_fonts, int n_chars, int resolution, std::uint64_t seed) {
    if (n_chars > kPseudoAlphabetSize)
        throw InsufficientItems("synthetic alphabet has only " +
                                std::to_string(kPseudoAlphabetSize) + " characters");
    std::vector<std::unique_ptr<FontSource>> fonts;
    Rng rng(seed);
    for (int f = 0; f < n_fonts; ++f) {
        SyntheticStyleParams p;
        p.stroke_thickness = rng.uniform(0.2, 0.9);
        p.slant = rng.uniform(-0.35, 0.35);
        p.serif_length = rng.uniform(0.0, 0.9);
        p.corner_roundness = rng.uniform(0.0, 1.0);
        p.contrast = rng.uniform(0.0, 0.8);
        fonts.push_back(generate_synthetic_font(p, seed * 1000003ULL + f));
    }
    return Corpus(std::move(fonts), n_chars, resolution);
}

const GlyphImage& Corpus::glyph(int font_id, int char_id) const {
    auto key = std::make_pair(font_id, char_id);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    GlyphImage img = render_glyph(*fonts_.at(font_id), font_id, char_id, resolution_);
    return cache_.emplace(key, std::move(img)).first->second;
}

// --- splits ------------------------------------------------------------------------

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

}  // namespace

DatasetSplit build_split(int n_fonts, double font_train_frac, const std::vector<int>& char_ids,
                         int n_train_chars, std::uint64_t seed) {
    if (!(font_train_frac > 0.0 && font_train_frac < 1.0))
        throw InvalidFraction("font_train_frac must be in (0,1)");
    if (n_train_chars >= static_cast<int>(char_ids.size()) || n_train_chars < 1)
        throw InsufficientItems("n_train_chars must be in [1, |char_ids|)");

    const int n_train_fonts =
        static_cast<int>(std::floor(font_train_frac * n_fonts + 0.5));  // round half up
    if (n_train_fonts < 1 || n_train_fonts >= n_fonts)
        throw InsufficientItems("split leaves no train or no test fonts");

    Rng rng(seed);
    std::vector<int> fonts(n_fonts);
    for (int i = 0; i < n_fonts; ++i) fonts[i] = i;
    shuffle(fonts, rng);
    std::vector<int> chars = char_ids;
    shuffle(chars, rng);

    DatasetSplit split;
    split.seed = seed;
    split.train_fonts.assign(fonts.begin(), fonts.begin() + n_train_fonts);
    split.test_fonts.assign(fonts.begin() + n_train_fonts, fonts.end());
    split.train_chars.assign(chars.begin(), chars.begin() + n_train_chars);
    split.test_chars.assign(chars.begin() + n_train_chars, chars.end());
    std::sort(split.train_fonts.begin(), split.train_fonts.end());
    std::sort(split.test_fonts.begin(), split.test_fonts.end());
    std::sort(split.train_chars.begin(), split.train_chars.end());
    std::sort(split.test_chars.begin(), split.test_chars.end());
    return split;
}

void save_split(const DatasetSplit& split, const std::string& path) {
    json j;
    j["train_fonts"] = split.train_fonts;
    j["test_fonts"] = split.test_fonts;
    j["train_chars"] = split.train_chars;
    j["test_chars"] = split.test_chars;
    j["seed"] = split.seed;
    std::ofstream out(path);
    if (!out) throw IOError("cannot write split manifest " + path);
    out << j.dump(2) << "\n";
}

DatasetSplit load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot read split manifest " + path);
    json j = json::parse(in);
    DatasetSplit split;
    split.train_fonts = j.at("train_fonts").get<std::vector<int>>();
    split.test_fonts = j.at("test_fonts").get<std::vector<int>>();
    split.train_chars = j.at("train_chars").get<std::vector<int>>();
    split.test_chars = j.at("test_chars").get<std::vector<int>>();
    split.seed = j.at("seed").get<std::uint64_t>();
    return split;
}

// --- sampling -------------------------------------------------------------------------

Triplet sample_triplet(const DatasetSplit& split, const Corpus& corpus, Rng& rng) {
    if (split.train_fonts.size() < 2 || split.train_chars.size() < 2)
        throw InsufficientItems("triplet sampling needs >= 2 train fonts and >= 2 train chars");

    const int anchor_font =
        split.train_fonts[rng.uniform_index(split.train_fonts.size())];
    const int anchor_char = split.train_chars[rng.uniform_index(split.train_chars.size())];
    int positive_char = anchor_char;
    while (positive_char == anchor_char)
        positive_char = split.train_chars[rng.uniform_index(split.train_chars.size())];
    int negative_font = anchor_font;
    while (negative_font == anchor_font)
        negative_font = split.train_fonts[rng.uniform_index(split.train_fonts.size())];

    Triplet t;
    t.anchor = corpus.glyph(anchor_font, anchor_char);
    t.positive = corpus.glyph(anchor_font, positive_char);
    t.negative = corpus.glyph(negative_font, anchor_char);
    return t;
}

std::vector<Triplet> mine_hard_triplets(
    const std::vector<Triplet>& triplets,
    const std::map<std::pair<int, int>, Tensor>& embeddings_by_image) {
    auto embedding = [&](const GlyphImage& img) -> const Tensor& {
        auto it = embeddings_by_image.find({img.font_id, img.char_id});
        if (it == embeddings_by_image.end())
            throw MissingEmbedding("no embedding for font " + std::to_string(img.font_id) +
                                   " char " + std::to_string(img.char_id));
        return it->second;
    };
    auto sq_dist = [](const Tensor& a, const Tensor& b) {
        if (a.size() != b.size()) throw DimMismatch("embedding dims differ");
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return s;
    };

    std::vector<Triplet> hard;
    double best_margin = -1e300;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        const Triplet& t = triplets[i];
        const double d_ap = sq_dist(embedding(t.anchor), embedding(t.positive));
        const double d_an = sq_dist(embedding(t.anchor), embedding(t.negative));
        if (d_an < d_ap) hard.push_back(t);
        const double margin = d_ap - d_an;
        if (margin > best_margin) {
            best_margin = margin;
            best_idx = i;
        }
    }
    if (hard.empty() && !triplets.empty()) hard.push_back(triplets[best_idx]);
    return hard;
}

GeneratorBatch assemble_generator_batch(const DatasetSplit& split, const Corpus& corpus,
                                        int batch_size, int k_references, int content_font_id,
                                        Rng& rng) {
    if (k_references < 1) throw InsufficientItems("k_references must be >= 1");
    if (std::find(split.train_fonts.begin(), split.train_fonts.end(), content_font_id) ==
        split.train_fonts.end())
        throw InsufficientItems("content font must be a train font");
    std::vector<int> target_fonts;
    for (int f : split.train_fonts)
        if (f != content_font_id) target_fonts.push_back(f);
    if (target_fonts.empty())
        throw InsufficientItems("no target fonts besides the content font");
    if (split.train_chars.empty()) throw InsufficientItems("no train chars");

    GeneratorBatch batch;
    for (int i = 0; i < batch_size; ++i) {
        const int font = target_fonts[rng.uniform_index(target_fonts.size())];
        const int chr = split.train_chars[rng.uniform_index(split.train_chars.size())];

        batch.sources.push_back(corpus.glyph(content_font_id, chr));
        batch.ground_truths.push_back(corpus.glyph(font, chr));
        batch.target_font_ids.push_back(font);
        batch.target_char_ids.push_back(chr);

        // reference chars avoid the target char unless the pool is too small
        std::vector<int> pool;
        for (int c : split.train_chars)
            if (c != chr) pool.push_back(c);
        std::vector<GlyphImage> refs;
        if (static_cast<int>(pool.size()) >= k_references) {
            shuffle(pool, rng);
            for (int j = 0; j < k_references; ++j) refs.push_back(corpus.glyph(font, pool[j]));
        } else {
            for (int j = 0; j < k_references; ++j) {
                const int c = split.train_chars[rng.uniform_index(split.train_chars.size())];
                refs.push_back(corpus.glyph(font, c));
            }
        }
        batch.references.push_back(std::move(refs));
    }
    return batch;
}

}  // namespace fontnet
