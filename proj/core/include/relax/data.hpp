#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relax/linalg.hpp"

namespace relax {

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Pixel values in [0, 1], stored row-major with the channel index fastest:
/// px[(y * width + x) * channels + c].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> px;

    Image() = default;
    Image(int h, int w, int c)
        : height(h), width(w), channels(c),
          px(static_cast<std::size_t>(h) * w * c, 0.0) {}

    double& at(int y, int x, int c) {
        return px[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return px[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

struct ImageExample {
    Image image;
    int label = 0;
};

struct ImageDataset {
    std::vector<ImageExample> examples;
    int height = 0;
    int width = 0;
    int channels = 0;
    int num_classes = 0; // max label + 1

    std::size_t size() const { return examples.size(); }
};

// ---------------------------------------------------------------------------
// Augmentation. Every transform is pure given (input, rng draws); the
// random wrappers document their draw order so substreams replay exactly.
// ---------------------------------------------------------------------------

/// Zero-pads by `pad` pixels per side, then crops the original size at
/// (offset_y, offset_x). Offsets in [0, 2*pad]; (pad, pad) is the identity.
Image pad_and_crop(const Image& img, int offset_y, int offset_x, int pad = 4);

/// Draws offset_y then offset_x uniformly over the (2*pad+1)^2 grid.
Image pad_and_random_crop(const Image& img, Rng& rng, int pad = 4);

struct JitterFactors {
    double brightness = 1.0;
    double contrast = 1.0;
    double saturation = 1.0;
    double hue_shift_deg = 0.0;
};

/// Applies brightness, contrast (about the per-image luma mean),
/// saturation (about per-pixel luma), then hue rotation via HSV, clamping
/// to [0, 1] after each stage. Requires 3 channels.
Image color_jitter(const Image& img, const JitterFactors& f);

/// Draws brightness, contrast, saturation from U[0.9, 1.1] and a hue shift
/// from U[-18, 18] degrees (5% of the hue circle), in that order.
Image color_jitter(const Image& img, Rng& rng);

/// Adds i.i.d. Gaussian pixel noise and clamps to [0, 1].
Image add_gaussian_noise(const Image& img, Rng& rng, double sigma = 0.005);

/// Per channel: subtract the per-image mean and divide by the per-image
/// standard deviation (floored at 1e-6).
Image normalize_per_image(const Image& img);

/// Row-major, channel-last flattening; unflatten is its exact inverse.
Vector flatten(const Image& img);
Image unflatten(const Vector& v, int height, int width, int channels);

/// Evaluation-path input: normalize + flatten.
Vector image_to_input(const Image& img);

/// Training-path input: crop -> color jitter (3-channel images only) ->
/// Gaussian noise -> normalize -> flatten.
Vector augment_to_input(const Image& img, Rng& rng);

// ---------------------------------------------------------------------------
// Text corpus
// ---------------------------------------------------------------------------

/// Ordered byte-substitution table applied before tokenization, mapping
/// typographic variants (curly quotes, dashes, ligatures, common accents)
/// to plain equivalents.
struct VariantMap {
    std::vector<std::pair<std::string, std::string>> subs;
};

VariantMap default_variant_map();

/// Loads a tab-separated "from<TAB>to" table; '#' lines are comments.
VariantMap load_variant_map(const std::string& path);

/// Variant substitution followed by ASCII lowercasing.
std::string preprocess_text(std::string_view raw, const VariantMap& map);

/// Character vocabulary ordered by descending frequency; index 0 is the
/// placeholder that absorbs every character below the frequency threshold.
struct Vocabulary {
    static constexpr char placeholder_char = '\x1a';

    std::vector<std::string> tokens;      // index -> token text
    std::array<int, 256> byte_to_index{}; // byte -> index, 0 if unmapped

    int size() const { return static_cast<int>(tokens.size()); }
    int lookup(char c) const { return byte_to_index[static_cast<unsigned char>(c)]; }
};

/// Counts length-n substrings (only n = 1 is supported), drops tokens with
/// occurrence rate below min_rate, and indexes the rest by descending
/// frequency starting at 1. Ties order by ascending byte value.
Vocabulary build_vocab(std::string_view corpus, int n = 1, double min_rate = 0.0001);

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const int> ids, const Vocabulary& vocab);

struct TokenWindow {
    std::vector<int> inputs; // first T tokens
    int target = 0;          // token T+1
};

/// Non-overlapping contiguous windows of length T+1; the remainder after
/// the last full window is dropped.
std::vector<TokenWindow> window_split(std::span<const int> tokens, int t_steps);

// ---------------------------------------------------------------------------
// Dataset files (see docs/formats.md)
// ---------------------------------------------------------------------------

/// Standard IDX pair (big-endian): 3-d ubyte images + 1-d ubyte labels.
/// Pixels are scaled to [0, 1].
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const std::string& images_path, const std::string& labels_path,
              const ImageDataset& ds);

/// "RLXD" container (little-endian): header + per-example label byte and
/// raw channel-last pixels. Round-trips byte data exactly.
ImageDataset load_raw(const std::string& path);
void save_raw(const std::string& path, const ImageDataset& ds);

std::string read_text_file(const std::string& path);

/// Deterministic shuffled 9:1 index split of [0, n).
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

SplitIndices split_train_val(std::size_t n, std::uint64_t seed);

} // namespace relax
