#include "relax/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace relax {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max(r, std::max(g, b));
    const double mn = std::min(r, std::min(g, b));
    const double d = mx - mn;
    v = mx;
    s = mx > 0.0 ? d / mx : 0.0;
    if (d <= 0.0) {
        h = 0.0;
    } else if (mx == r) {
        h = 60.0 * std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
        h = 60.0 * ((b - r) / d + 2.0);
    } else {
        h = 60.0 * ((r - g) / d + 4.0);
    }
    if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1)      { r1 = c; g1 = x; }
    else if (hp < 2) { r1 = x; g1 = c; }
    else if (hp < 3) { g1 = c; b1 = x; }
    else if (hp < 4) { g1 = x; b1 = c; }
    else if (hp < 5) { r1 = x; b1 = c; }
    else             { r1 = c; b1 = x; }
    const double m = v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

} // namespace

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

Image pad_and_crop(const Image& img, int offset_y, int offset_x, int pad) {
    if (pad < 0 || offset_y < 0 || offset_x < 0 || offset_y > 2 * pad || offset_x > 2 * pad) {
        throw config_error("pad_and_crop: offsets must lie in [0, 2*pad]");
    }
    Image out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        // Source coordinates in the padded image, shifted back to the input.
        const int sy = y + offset_y - pad;
        if (sy < 0 || sy >= img.height) continue; // padded rows stay black
        for (int x = 0; x < img.width; ++x) {
            const int sx = x + offset_x - pad;
            if (sx < 0 || sx >= img.width) continue;
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = img.at(sy, sx, c);
            }
        }
    }
    return out;
}

Image pad_and_random_crop(const Image& img, Rng& rng, int pad) {
    const int span = 2 * pad + 1;
    const int oy = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(span)));
    const int ox = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(span)));
    return pad_and_crop(img, oy, ox, pad);
}

Image color_jitter(const Image& img, const JitterFactors& f) {
    if (img.channels != 3) {
        throw config_error("color_jitter: requires a 3-channel image");
    }
    Image out = img;
    const std::size_t n_px = static_cast<std::size_t>(img.height) * img.width;

    // Each stage short-circuits at its neutral factor so that unit factors
    // reproduce the input exactly.
    if (f.brightness != 1.0) {
        for (double& v : out.px) v = clamp01(v * f.brightness);
    }

    if (f.contrast != 1.0) {
        // Contrast about the per-image luma mean.
        double mean_gray = 0.0;
        for (std::size_t i = 0; i < n_px; ++i) {
            mean_gray += luma(out.px[3 * i], out.px[3 * i + 1], out.px[3 * i + 2]);
        }
        mean_gray /= static_cast<double>(n_px);
        for (double& v : out.px) v = clamp01(mean_gray + (v - mean_gray) * f.contrast);
    }

    if (f.saturation != 1.0) {
        // Saturation about the per-pixel luma.
        for (std::size_t i = 0; i < n_px; ++i) {
            const double l = luma(out.px[3 * i], out.px[3 * i + 1], out.px[3 * i + 2]);
            for (int c = 0; c < 3; ++c) {
                out.px[3 * i + c] = clamp01(l + (out.px[3 * i + c] - l) * f.saturation);
            }
        }
    }

    // Hue rotation.
    if (f.hue_shift_deg != 0.0) {
        for (std::size_t i = 0; i < n_px; ++i) {
            double h, s, v;
            rgb_to_hsv(out.px[3 * i], out.px[3 * i + 1], out.px[3 * i + 2], h, s, v);
            h = std::fmod(h + f.hue_shift_deg + 360.0, 360.0);
            double r, g, b;
            hsv_to_rgb(h, s, v, r, g, b);
            out.px[3 * i] = clamp01(r);
            out.px[3 * i + 1] = clamp01(g);
            out.px[3 * i + 2] = clamp01(b);
        }
    }
    return out;
}

Image color_jitter(const Image& img, Rng& rng) {
    JitterFactors f;
    f.brightness = 0.9 + 0.2 * rng.next_double();
    f.contrast = 0.9 + 0.2 * rng.next_double();
    f.saturation = 0.9 + 0.2 * rng.next_double();
    f.hue_shift_deg = -18.0 + 36.0 * rng.next_double(); // 5% of the hue circle
    return color_jitter(img, f);
}

Image add_gaussian_noise(const Image& img, Rng& rng, double sigma) {
    Image out = img;
    if (sigma == 0.0) return out;
    Vector noise = draw_gaussian(rng, 0.0, sigma, out.px.size());
    for (std::size_t i = 0; i < out.px.size(); ++i) {
        out.px[i] = clamp01(out.px[i] + noise[i]);
    }
    return out;
}

Image normalize_per_image(const Image& img) {
    Image out = img;
    const std::size_t n_px = static_cast<std::size_t>(img.height) * img.width;
    for (int c = 0; c < img.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n_px; ++i) mean += img.px[i * img.channels + c];
        mean /= static_cast<double>(n_px);
        double var = 0.0;
        for (std::size_t i = 0; i < n_px; ++i) {
            const double d = img.px[i * img.channels + c] - mean;
            var += d * d;
        }
        const double sd = std::max(std::sqrt(var / static_cast<double>(n_px)), 1e-6);
        for (std::size_t i = 0; i < n_px; ++i) {
            out.px[i * img.channels + c] = (img.px[i * img.channels + c] - mean) / sd;
        }
    }
    return out;
}

Vector flatten(const Image& img) {
    Vector v(img.px.size());
    std::copy(img.px.begin(), img.px.end(), v.data.begin());
    return v;
}

Image unflatten(const Vector& v, int height, int width, int channels) {
    if (v.size() != static_cast<std::size_t>(height) * width * channels) {
        throw config_error("unflatten: length does not match the dimensions");
    }
    Image img(height, width, channels);
    std::copy(v.data.begin(), v.data.end(), img.px.begin());
    return img;
}

Vector image_to_input(const Image& img) { return flatten(normalize_per_image(img)); }

Vector augment_to_input(const Image& img, Rng& rng) {
    Image a = pad_and_random_crop(img, rng);
    if (a.channels == 3) {
        a = color_jitter(a, rng);
    }
    a = add_gaussian_noise(a, rng);
    return flatten(normalize_per_image(a));
}

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

VariantMap default_variant_map() {
    VariantMap m;
    auto add = [&m](const char* from, const char* to) { m.subs.emplace_back(from, to); };
    // Quotes and apostrophes.
    add("‘", "'"); add("’", "'"); add("‚", "'"); add("‛", "'");
    add("“", "\""); add("”", "\""); add("„", "\""); add("‟", "\"");
    // Dashes and ellipsis.
    add("‐", "-"); add("‑", "-"); add("‒", "-"); add("–", "-");
    add("—", "-"); add("―", "-"); add("…", "...");
    // Ligatures and digraphs.
    add("ﬁ", "fi"); add("ﬂ", "fl"); add("Æ", "ae"); add("æ", "ae");
    add("Œ", "oe"); add("œ", "oe");
    // Common accented Latin letters.
    add("À", "a"); add("Á", "a"); add("Â", "a"); add("Ä", "a");
    add("à", "a"); add("á", "a"); add("â", "a"); add("ä", "a");
    add("È", "e"); add("É", "e"); add("Ê", "e"); add("Ë", "e");
    add("è", "e"); add("é", "e"); add("ê", "e"); add("ë", "e");
    add("Ì", "i"); add("Í", "i"); add("Î", "i"); add("Ï", "i");
    add("ì", "i"); add("í", "i"); add("î", "i"); add("ï", "i");
    add("Ò", "o"); add("Ó", "o"); add("Ô", "o"); add("Ö", "o");
    add("ò", "o"); add("ó", "o"); add("ô", "o"); add("ö", "o");
    add("Ù", "u"); add("Ú", "u"); add("Û", "u"); add("Ü", "u");
    add("ù", "u"); add("ú", "u"); add("û", "u"); add("ü", "u");
    add("Ç", "c"); add("ç", "c"); add("Ñ", "n"); add("ñ", "n");
    // Non-breaking space.
    add(" ", " ");
    return m;
}

VariantMap load_variant_map(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw data_error("variant map: cannot open " + path);
    }
    VariantMap m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw data_error("variant map: malformed line " + std::to_string(line_no) +
                             " in " + path);
        }
        m.subs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return m;
}

std::string preprocess_text(std::string_view raw, const VariantMap& map) {
    std::string out;
    out.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        bool replaced = false;
        for (const auto& [from, to] : map.subs) {
            if (!from.empty() && raw.compare(i, from.size(), from) == 0) {
                out += to;
                i += from.size();
                replaced = true;
                break;
            }
        }
        if (!replaced) {
            char c = raw[i];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            out += c;
            ++i;
        }
    }
    // Lowercase any ASCII uppercase that arrived through a substitution.
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

Vocabulary build_vocab(std::string_view corpus, int n, double min_rate) {
    if (n != 1) {
        throw config_error("build_vocab: only n=1 tokenization is supported");
    }
    if (corpus.empty()) {
        throw data_error("build_vocab: empty corpus");
    }
    std::array<std::uint64_t, 256> counts{};
    for (char c : corpus) {
        ++counts[static_cast<unsigned char>(c)];
    }
    // The placeholder byte itself is reserved and never becomes a token.
    counts[static_cast<unsigned char>(Vocabulary::placeholder_char)] = 0;

    struct Entry {
        unsigned char byte;
        std::uint64_t count;
    };
    std::vector<Entry> kept;
    const double total = static_cast<double>(corpus.size());
    for (int b = 0; b < 256; ++b) {
        if (counts[static_cast<std::size_t>(b)] == 0) continue;
        const double rate = static_cast<double>(counts[static_cast<std::size_t>(b)]) / total;
        if (rate >= min_rate) {
            kept.push_back({static_cast<unsigned char>(b), counts[static_cast<std::size_t>(b)]});
        }
    }
    std::sort(kept.begin(), kept.end(), [](const Entry& a, const Entry& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.byte < b.byte;
    });

    Vocabulary v;
    v.byte_to_index.fill(0);
    v.tokens.emplace_back(1, Vocabulary::placeholder_char);
    for (const Entry& e : kept) {
        v.byte_to_index[e.byte] = static_cast<int>(v.tokens.size());
        v.tokens.emplace_back(1, static_cast<char>(e.byte));
    }
    return v;
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (char c : text) {
        ids.push_back(vocab.lookup(c));
    }
    return ids;
}

std::string detokenize(std::span<const int> ids, const Vocabulary& vocab) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= vocab.size()) {
            throw config_error("detokenize: id " + std::to_string(id) +
                               " outside the vocabulary");
        }
        out += vocab.tokens[static_cast<std::size_t>(id)];
    }
    return out;
}

std::vector<TokenWindow> window_split(std::span<const int> tokens, int t_steps) {
    if (t_steps < 1) {
        throw config_error("window_split: need T >= 1");
    }
    const std::size_t win = static_cast<std::size_t>(t_steps) + 1;
    if (tokens.size() < win) {
        throw config_error("window_split: window of " + std::to_string(win) +
                           " exceeds the stream length " + std::to_string(tokens.size()));
    }
    std::vector<TokenWindow> out;
    out.reserve(tokens.size() / win);
    for (std::size_t start = 0; start + win <= tokens.size(); start += win) {
        TokenWindow w;
        w.inputs.assign(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                        tokens.begin() + static_cast<std::ptrdiff_t>(start + win - 1));
        w.target = tokens[start + win - 1];
        out.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

namespace {

std::uint32_t get_be32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw data_error("idx: truncated file " + path);
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void put_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_le32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw data_error("rlxd: truncated file " + path);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_le32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

unsigned char quantize_byte(double v) {
    const double scaled = std::round(clamp01(v) * 255.0);
    return static_cast<unsigned char>(scaled);
}

void finalize_classes(ImageDataset& ds) {
    int max_label = -1;
    for (const auto& ex : ds.examples) max_label = std::max(max_label, ex.label);
    ds.num_classes = max_label + 1;
}

} // namespace

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img_is(images_path, std::ios::binary);
    if (!img_is) throw data_error("idx: cannot open " + images_path);
    std::ifstream lbl_is(labels_path, std::ios::binary);
    if (!lbl_is) throw data_error("idx: cannot open " + labels_path);

    if (get_be32(img_is, images_path) != 0x00000803u) {
        throw data_error("idx: bad image magic in " + images_path);
    }
    const std::uint32_t n_images = get_be32(img_is, images_path);
    const std::uint32_t rows = get_be32(img_is, images_path);
    const std::uint32_t cols = get_be32(img_is, images_path);

    if (get_be32(lbl_is, labels_path) != 0x00000801u) {
        throw data_error("idx: bad label magic in " + labels_path);
    }
    const std::uint32_t n_labels = get_be32(lbl_is, labels_path);
    if (n_images != n_labels) {
        throw data_error("idx: image/label count mismatch (" + std::to_string(n_images) +
                         " vs " + std::to_string(n_labels) + ")");
    }
    if (rows == 0 || cols == 0) {
        throw data_error("idx: zero image dimensions in " + images_path);
    }

    ImageDataset ds;
    ds.height = static_cast<int>(rows);
    ds.width = static_cast<int>(cols);
    ds.channels = 1;
    ds.examples.reserve(n_images);

    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img_is.read(reinterpret_cast<char*>(buf.data()),
                         static_cast<std::streamsize>(buf.size()))) {
            throw data_error("idx: truncated image data in " + images_path);
        }
        char label;
        if (!lbl_is.read(&label, 1)) {
            throw data_error("idx: truncated label data in " + labels_path);
        }
        ImageExample ex;
        ex.label = static_cast<unsigned char>(label);
        ex.image = Image(ds.height, ds.width, 1);
        for (std::size_t p = 0; p < buf.size(); ++p) {
            ex.image.px[p] = static_cast<double>(buf[p]) / 255.0;
        }
        ds.examples.push_back(std::move(ex));
    }
    finalize_classes(ds);
    return ds;
}

void save_idx(const std::string& images_path, const std::string& labels_path,
              const ImageDataset& ds) {
    if (ds.channels != 1) {
        throw config_error("idx: only single-channel datasets can be written");
    }
    std::ofstream img_os(images_path, std::ios::binary);
    if (!img_os) throw data_error("idx: cannot open for writing: " + images_path);
    std::ofstream lbl_os(labels_path, std::ios::binary);
    if (!lbl_os) throw data_error("idx: cannot open for writing: " + labels_path);

    put_be32(img_os, 0x00000803u);
    put_be32(img_os, static_cast<std::uint32_t>(ds.size()));
    put_be32(img_os, static_cast<std::uint32_t>(ds.height));
    put_be32(img_os, static_cast<std::uint32_t>(ds.width));
    put_be32(lbl_os, 0x00000801u);
    put_be32(lbl_os, static_cast<std::uint32_t>(ds.size()));

    for (const auto& ex : ds.examples) {
        for (double v : ex.image.px) {
            const char b = static_cast<char>(quantize_byte(v));
            img_os.write(&b, 1);
        }
        const char label = static_cast<char>(ex.label);
        lbl_os.write(&label, 1);
    }
    if (!img_os || !lbl_os) {
        throw data_error("idx: write failed");
    }
}

ImageDataset load_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("rlxd: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string_view(magic, 4) != "RLXD") {
        throw data_error("rlxd: bad magic in " + path);
    }
    const std::uint32_t version = get_le32(is, path);
    if (version != 1) {
        throw data_error("rlxd: unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = get_le32(is, path);
    const std::uint32_t h = get_le32(is, path);
    const std::uint32_t w = get_le32(is, path);
    const std::uint32_t c = get_le32(is, path);
    if (h == 0 || w == 0 || c == 0) {
        throw data_error("rlxd: zero dimensions in " + path);
    }

    ImageDataset ds;
    ds.height = static_cast<int>(h);
    ds.width = static_cast<int>(w);
    ds.channels = static_cast<int>(c);
    ds.examples.reserve(count);

    std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * c);
    for (std::uint32_t i = 0; i < count; ++i) {
        char label;
        if (!is.read(&label, 1) ||
            !is.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size()))) {
            throw data_error("rlxd: truncated example data in " + path);
        }
        ImageExample ex;
        ex.label = static_cast<unsigned char>(label);
        ex.image = Image(ds.height, ds.width, ds.channels);
        for (std::size_t p = 0; p < buf.size(); ++p) {
            ex.image.px[p] = static_cast<double>(buf[p]) / 255.0;
        }
        ds.examples.push_back(std::move(ex));
    }
    char extra;
    if (is.read(&extra, 1)) {
        throw data_error("rlxd: trailing bytes in " + path);
    }
    finalize_classes(ds);
    return ds;
}

void save_raw(const std::string& path, const ImageDataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("rlxd: cannot open for writing: " + path);
    os.write("RLXD", 4);
    put_le32(os, 1);
    put_le32(os, static_cast<std::uint32_t>(ds.size()));
    put_le32(os, static_cast<std::uint32_t>(ds.height));
    put_le32(os, static_cast<std::uint32_t>(ds.width));
    put_le32(os, static_cast<std::uint32_t>(ds.channels));
    for (const auto& ex : ds.examples) {
        const char label = static_cast<char>(ex.label);
        os.write(&label, 1);
        for (double v : ex.image.px) {
            const char b = static_cast<char>(quantize_byte(v));
            os.write(&b, 1);
        }
    }
    if (!os) throw data_error("rlxd: write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

SplitIndices split_train_val(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x517ULL));
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(order[i - 1], order[j]);
    }
    SplitIndices s;
    const std::size_t n_val = n / 10;
    s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    return s;
}

} // namespace relax
