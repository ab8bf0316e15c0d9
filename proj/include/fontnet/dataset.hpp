#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fontnet/image.hpp"
#include "fontnet/rng.hpp"

namespace fontnet {

// --- synthetic fonts ---------------------------------------------------------

struct SyntheticStyleParams {
    double stroke_thickness = 0.5;  // (0, 1]
    double slant = 0.0;             // radians, [-0.5, 0.5]
    double serif_length = 0.0;      // >= 0
    double corner_roundness = 0.0;  // [0, 1]
    double contrast = 0.0;          // [0, 1]

    void validate() const;
};

// One stroke of a pseudo-character: a segment between two points of a 3x3
// anchor lattice, optionally bowed into a quadratic arc by the font's
// corner_roundness.
struct Stroke {
    int a = 0;        // lattice index 0..8
    int b = 0;
    int bow_sign = 1;  // arc side
};

// The fixed pseudo-alphabet shared by every synthetic font. Characters are
// generated once, deterministically, with duplicate stroke sets rejected.
const std::vector<std::vector<Stroke>>& pseudo_alphabet();
constexpr int kPseudoAlphabetSize = 40;

// --- font sources ------------------------------------------------------------

class FontSource {
public:
    virtual ~FontSource() = default;
    virtual bool has_glyph(int char_id) const = 0;
    virtual Tensor render(int char_id, int resolution) const = 0;  // HxW in [0,1]
    virtual std::string name() const = 0;
};

class SyntheticFontSource final : public FontSource {
public:
    SyntheticFontSource(SyntheticStyleParams params, std::uint64_t seed);
    bool has_glyph(int char_id) const override;
    Tensor render(int char_id, int resolution) const override;
    std::string name() const override;
    const SyntheticStyleParams& params() const { return params_; }

private:
    SyntheticStyleParams params_;
    std::uint64_t seed_;
};

// Loads glyphs from the pre-rendered layout <root>/<font_name>/<codepoint>.png.
class PrerenderedFontSource final : public FontSource {
public:
    // char_ids index into the corpus-wide sorted codepoint registry
    PrerenderedFontSource(std::string dir, std::string font_name,
                          std::map<int, std::string> files_by_char);
    bool has_glyph(int char_id) const override;
    Tensor render(int char_id, int resolution) const override;
    std::string name() const override { return font_name_; }

private:
    std::string dir_;
    std::string font_name_;
    std::map<int, std::string> files_by_char_;
};

std::unique_ptr<FontSource> generate_synthetic_font(const SyntheticStyleParams& params,
                                                    std::uint64_t seed);

GlyphImage render_glyph(const FontSource& font, int font_id, int char_id, int resolution);

// Scans a pre-rendered corpus root; fonts ordered by directory name, chars by
// codepoint. Returns (fonts, codepoints).
std::pair<std::vector<std::unique_ptr<FontSource>>, std::vector<int>> load_prerendered_corpus(
    const std::string& root);

// --- corpus -------------------------------------------------------------------

// A registry of fonts plus a render cache.
class Corpus {
public:
    Corpus(std::vector<std::unique_ptr<FontSource>> fonts, int n_chars, int resolution);

    // n synthetic fonts with seeded style parameters
    static Corpus synthetic(int n_fonts, int n_chars, int resolution, std::uint64_t seed);

    int n_fonts() const { return static_cast<int>(fonts_.size()); }
    int n_chars() const { return n_chars_; }
    int resolution() const { return resolution_; }
    const FontSource& font(int font_id) const { return *fonts_.at(font_id); }

    const GlyphImage& glyph(int font_id, int char_id) const;

private:
    std::vector<std::unique_ptr<FontSource>> fonts_;
    int n_chars_;
    int resolution_;
    mutable std::map<std::pair<int, int>, GlyphImage> cache_;
};

// --- splits -------------------------------------------------------------------

struct DatasetSplit {
    std::vector<int> train_fonts, test_fonts;
    std::vector<int> train_chars, test_chars;
    std::uint64_t seed = 0;
};

DatasetSplit build_split(int n_fonts, double font_train_frac, const std::vector<int>& char_ids,
                         int n_train_chars, std::uint64_t seed);

void save_split(const DatasetSplit& split, const std::string& path);
DatasetSplit load_split(const std::string& path);

// --- sampling -----------------------------------------------------------------

struct Triplet {
    GlyphImage anchor, positive, negative;
};

Triplet sample_triplet(const DatasetSplit& split, const Corpus& corpus, Rng& rng);

// Keeps exactly the triplets whose negative sits closer to the anchor than the
// positive does (squared embedding distance). If none violate, returns the
// single triplet with the largest margin violation so a training step always
// has input. Embeddings are keyed by (font_id, char_id).
std::vector<Triplet> mine_hard_triplets(
    const std::vector<Triplet>& triplets,
    const std::map<std::pair<int, int>, Tensor>& embeddings_by_image);

struct GeneratorBatch {
    std::vector<GlyphImage> sources;
    std::vector<std::vector<GlyphImage>> references;
    std::vector<GlyphImage> ground_truths;
    std::vector<int> target_font_ids;
    std::vector<int> target_char_ids;

    std::size_t size() const { return sources.size(); }
};

GeneratorBatch assemble_generator_batch(const DatasetSplit& split, const Corpus& corpus,
                                        int batch_size, int k_references, int content_font_id,
                                        Rng& rng);

}  // namespace fontnet
