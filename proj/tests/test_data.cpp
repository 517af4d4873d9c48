#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "relax/data.hpp"

using namespace relax;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
    Image img(h, w, c);
    Rng rng(seed);
    for (double& v : img.px) v = rng.next_double();
    return img;
}

std::filesystem::path tmp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("relax_data_" + name);
}

} // namespace

TEST_CASE("pad_and_crop: centered offset is the identity") {
    Image img = random_image(32, 32, 3, 1);
    Image out = pad_and_crop(img, 4, 4);
    for (std::size_t i = 0; i < img.px.size(); ++i) CHECK(out.px[i] == img.px[i]);
}

TEST_CASE("pad_and_crop: corner offset exposes the black padding") {
    Image img(32, 32, 3);
    for (double& v : img.px) v = 1.0;
    Image out = pad_and_crop(img, 0, 0);
    // Offset (0,0) shifts the image down-right: the first four rows and
    // columns come from the padding.
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == 0.0);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == 0.0);
    CHECK(out.at(10, 10, 0) == 1.0);
    CHECK_THROWS_AS(pad_and_crop(img, 9, 0), config_error);
}

TEST_CASE("pad_and_random_crop: all 81 offsets reachable and equiprobable") {
    Image img(8, 8, 1);
    for (double& v : img.px) v = 1.0;
    Rng rng(7);
    const int n = 100000;
    std::array<int, 81> counts{};
    for (int i = 0; i < n; ++i) {
        Image out = pad_and_random_crop(img, rng);
        // Recover the offsets from the zero margins.
        int top = 0, bottom = 0, left = 0, right = 0;
        while (top < 8 && out.at(top, 7, 0) == 0.0 && out.at(top, 0, 0) == 0.0) ++top;
        while (bottom < 8 && out.at(7 - bottom, 7, 0) == 0.0 && out.at(7 - bottom, 0, 0) == 0.0)
            ++bottom;
        while (left < 8 && out.at(7, left, 0) == 0.0 && out.at(0, left, 0) == 0.0) ++left;
        while (right < 8 && out.at(7, 7 - right, 0) == 0.0 && out.at(0, 7 - right, 0) == 0.0)
            ++right;
        const int oy = 4 - top + bottom;
        const int ox = 4 - left + right;
        REQUIRE(oy >= 0);
        REQUIRE(oy <= 8);
        REQUIRE(ox >= 0);
        REQUIRE(ox <= 8);
        ++counts[static_cast<std::size_t>(oy * 9 + ox)];
    }
    const double expect = n / 81.0;
    const double three_sigma = 3.0 * std::sqrt(n * (1.0 / 81.0) * (80.0 / 81.0));
    for (int b = 0; b < 81; ++b) {
        CHECK(std::fabs(counts[static_cast<std::size_t>(b)] - expect) <= three_sigma);
    }
}

TEST_CASE("color_jitter: unit factors are the identity") {
    Image img = random_image(16, 16, 3, 11);
    Image out = color_jitter(img, JitterFactors{});
    for (std::size_t i = 0; i < img.px.size(); ++i) CHECK(out.px[i] == img.px[i]);
}

TEST_CASE("color_jitter: gray images are invariant under saturation and hue") {
    Image gray(8, 8, 3);
    Rng rng(13);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const double v = rng.next_double();
            for (int c = 0; c < 3; ++c) gray.at(y, x, c) = v;
        }
    JitterFactors f;
    f.saturation = 1.08;
    f.hue_shift_deg = 13.0;
    Image out = color_jitter(gray, f);
    for (std::size_t i = 0; i < gray.px.size(); ++i) {
        CHECK(std::fabs(out.px[i] - gray.px[i]) <= 1e-12);
    }
}

TEST_CASE("color_jitter: brightness clamps at 1") {
    Image img(2, 2, 3);
    for (double& v : img.px) v = 0.95;
    JitterFactors f;
    f.brightness = 1.1;
    Image out = color_jitter(img, f);
    for (double v : out.px) CHECK(v == 1.0);
}

TEST_CASE("color_jitter: grayscale input is rejected") {
    Image img(4, 4, 1);
    CHECK_THROWS_AS(color_jitter(img, JitterFactors{}), config_error);
}

TEST_CASE("add_gaussian_noise: zero sigma is the identity, statistics hold") {
    Image img = random_image(10, 10, 1, 17);
    Rng zero_rng(1);
    Image same = add_gaussian_noise(img, zero_rng, 0.0);
    for (std::size_t i = 0; i < img.px.size(); ++i) CHECK(same.px[i] == img.px[i]);

    Image mid(1000, 1000, 1);
    for (double& v : mid.px) v = 0.5;
    Rng rng(18);
    Image noisy = add_gaussian_noise(mid, rng); // sigma 0.005, far from the clamp
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < noisy.px.size(); ++i) {
        const double d = noisy.px[i] - 0.5;
        mean += d;
        sq += d * d;
    }
    mean /= static_cast<double>(noisy.px.size());
    const double std_dev = std::sqrt(sq / static_cast<double>(noisy.px.size()) - mean * mean);
    CHECK(std::fabs(std_dev - 0.005) / 0.005 <= 0.02);

    Rng a(19), b(19);
    Image na = add_gaussian_noise(img, a);
    Image nb = add_gaussian_noise(img, b);
    for (std::size_t i = 0; i < na.px.size(); ++i) CHECK(na.px[i] == nb.px[i]);
}

TEST_CASE("normalize_per_image: constant channels and moment recomputation") {
    Image flat(6, 6, 2);
    for (double& v : flat.px) v = 0.25;
    Image out = normalize_per_image(flat);
    for (double v : out.px) CHECK(v == 0.0); // std floor path

    Image img = random_image(12, 12, 3, 23);
    Image norm = normalize_per_image(img);
    for (int c = 0; c < 3; ++c) {
        double mean = 0, sq = 0;
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x) mean += norm.at(y, x, c);
        mean /= 144.0;
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x) {
                const double d = norm.at(y, x, c) - mean;
                sq += d * d;
            }
        const double std_dev = std::sqrt(sq / 144.0);
        CHECK(std::fabs(mean) <= 1e-9);
        CHECK(std::fabs(std_dev - 1.0) <= 1e-6);
    }
}

TEST_CASE("flatten: documented order and exact inverse") {
    Image img(2, 3, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x)
            for (int c = 0; c < 2; ++c) img.at(y, x, c) = 100.0 * y + 10.0 * x + c;
    Vector v = flatten(img);
    // Row-major, channel-last: index (y*W + x)*C + c.
    CHECK(v[0] == 0.0);    // (0,0,0)
    CHECK(v[1] == 1.0);    // (0,0,1)
    CHECK(v[2] == 10.0);   // (0,1,0)
    CHECK(v[6] == 100.0);  // (1,0,0)
    Image back = unflatten(v, 2, 3, 2);
    for (std::size_t i = 0; i < img.px.size(); ++i) CHECK(back.px[i] == img.px[i]);
    CHECK_THROWS_AS(unflatten(v, 3, 3, 2), config_error);
}

TEST_CASE("build_vocab: frequency order with placeholder at zero") {
    Vocabulary v = build_vocab("aaab", 1, 0.0);
    REQUIRE(v.size() == 3);
    CHECK(v.tokens[0] == std::string(1, Vocabulary::placeholder_char));
    CHECK(v.tokens[1] == "a");
    CHECK(v.tokens[2] == "b");
    CHECK(v.lookup('a') == 1);
    CHECK(v.lookup('b') == 2);
    CHECK(v.lookup('c') == 0);
}

TEST_CASE("build_vocab: rare characters fall below the threshold") {
    std::string corpus(20000, 'a');
    corpus += 'z'; // rate 1/20001 < 0.01%
    Vocabulary v = build_vocab(corpus);
    CHECK(v.lookup('a') == 1);
    CHECK(v.lookup('z') == 0);
}

TEST_CASE("build_vocab: input validation") {
    CHECK_THROWS_AS(build_vocab(""), data_error);
    CHECK_THROWS_AS(build_vocab("abc", 2), config_error);
}

TEST_CASE("tokenize: length preserved, out-of-vocabulary maps to zero") {
    Vocabulary v = build_vocab("hello world", 1, 0.0);
    std::vector<int> ids = tokenize("hello", v);
    CHECK(ids.size() == 5);
    for (int id : ids) CHECK(id > 0);
    std::vector<int> oov = tokenize("h!", v);
    CHECK(oov[1] == 0);
    CHECK(detokenize(tokenize("world hello", v), v) == "world hello");
    CHECK_THROWS_AS(detokenize(std::vector<int>{99}, v), config_error);
}

TEST_CASE("window_split: counts, targets, reconstruction") {
    std::vector<int> tokens;
    for (int i = 0; i < 25; ++i) tokens.push_back(i);
    auto windows = window_split(tokens, 4);
    REQUIRE(windows.size() == 5);
    CHECK(windows[0].inputs.size() == 4);
    CHECK(windows[0].target == 4);

    // Concatenating inputs+target reproduces the truncated stream.
    std::vector<int> rebuilt;
    for (const auto& w : windows) {
        rebuilt.insert(rebuilt.end(), w.inputs.begin(), w.inputs.end());
        rebuilt.push_back(w.target);
    }
    for (std::size_t i = 0; i < rebuilt.size(); ++i) CHECK(rebuilt[i] == tokens[i]);

    std::vector<int> three{1, 2, 3};
    CHECK_THROWS_AS(window_split(three, 3), config_error);
}

TEST_CASE("preprocess_text: lowercasing and variant mapping") {
    const VariantMap vm = default_variant_map();
    CHECK(preprocess_text("To Be, Or NOT", vm) == "to be, or not");
    CHECK(preprocess_text("don’t", vm) == "don't");
    CHECK(preprocess_text("a—b", vm) == "a-b");
    CHECK(preprocess_text("café", vm) == "cafe");
    CHECK(preprocess_text("“quoted”", vm) == "\"quoted\"");
}

TEST_CASE("load_variant_map: file parsing and validation") {
    const auto path = tmp_file("variants.tsv");
    {
        std::ofstream os(path);
        os << "# comment line\n";
        os << "’\t'\n";
        os << "—\t-\n";
    }
    VariantMap vm = load_variant_map(path.string());
    CHECK(vm.subs.size() == 2);
    CHECK(preprocess_text("don’t", vm) == "don't");
    {
        std::ofstream os(path);
        os << "no-tab-here\n";
    }
    CHECK_THROWS_AS(load_variant_map(path.string()), data_error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_variant_map("/nonexistent/v.tsv"), data_error);
}

TEST_CASE("variant map: the shipped file matches the built-in default") {
    VariantMap shipped = load_variant_map(std::string(RELAX_DATA_DIR) + "/variant_map.tsv");
    VariantMap builtin = default_variant_map();
    REQUIRE(shipped.subs.size() == builtin.subs.size());
    const std::string sample = "‘Café’ — “naïve”… ﬁn";
    CHECK(preprocess_text(sample, shipped) == preprocess_text(sample, builtin));
}

TEST_CASE("idx: hand-crafted two-image fixture loads with expected bytes") {
    const auto img_path = tmp_file("fixture-images-idx3");
    const auto lbl_path = tmp_file("fixture-labels-idx1");
    {
        std::ofstream os(img_path, std::ios::binary);
        const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
        os.write(reinterpret_cast<const char*>(header), sizeof(header));
        const unsigned char pixels[] = {0, 255, 128, 64, 10, 20, 30, 40};
        os.write(reinterpret_cast<const char*>(pixels), sizeof(pixels));
    }
    {
        std::ofstream os(lbl_path, std::ios::binary);
        const unsigned char header[] = {0, 0, 8, 1, 0, 0, 0, 2};
        os.write(reinterpret_cast<const char*>(header), sizeof(header));
        const unsigned char labels[] = {7, 3};
        os.write(reinterpret_cast<const char*>(labels), sizeof(labels));
    }
    ImageDataset ds = load_idx(img_path.string(), lbl_path.string());
    REQUIRE(ds.size() == 2);
    CHECK(ds.height == 2);
    CHECK(ds.width == 2);
    CHECK(ds.examples[0].label == 7);
    CHECK(ds.examples[1].label == 3);
    CHECK(ds.examples[0].image.at(0, 0, 0) == 0.0);
    CHECK(ds.examples[0].image.at(0, 1, 0) == 1.0);
    CHECK(ds.examples[0].image.at(1, 0, 0) == doctest::Approx(128.0 / 255.0));
    CHECK(ds.examples[1].image.at(1, 1, 0) == doctest::Approx(40.0 / 255.0));
    CHECK(ds.num_classes == 8);

    // Truncation is a load error, not a crash.
    std::filesystem::resize_file(img_path, 20);
    CHECK_THROWS_AS(load_idx(img_path.string(), lbl_path.string()), data_error);
    std::filesystem::remove(img_path);
    std::filesystem::remove(lbl_path);
}

TEST_CASE("idx: save and reload round trip") {
    ImageDataset ds;
    ds.height = 4;
    ds.width = 3;
    ds.channels = 1;
    Rng rng(31);
    for (int i = 0; i < 5; ++i) {
        ImageExample ex;
        ex.label = i % 3;
        ex.image = Image(4, 3, 1);
        for (double& v : ex.image.px) {
            v = static_cast<double>(rng.next_below(256)) / 255.0;
        }
        ds.examples.push_back(std::move(ex));
    }
    ds.num_classes = 3;
    const auto img_path = tmp_file("rt-images-idx3");
    const auto lbl_path = tmp_file("rt-labels-idx1");
    save_idx(img_path.string(), lbl_path.string(), ds);
    ImageDataset back = load_idx(img_path.string(), lbl_path.string());
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.examples[i].label == ds.examples[i].label);
        for (std::size_t p = 0; p < ds.examples[i].image.px.size(); ++p) {
            CHECK(back.examples[i].image.px[p] == ds.examples[i].image.px[p]);
        }
    }
    std::filesystem::remove(img_path);
    std::filesystem::remove(lbl_path);
}

TEST_CASE("rlxd: write-read round trip is the identity") {
    ImageDataset ds;
    ds.height = 3;
    ds.width = 3;
    ds.channels = 3;
    Rng rng(37);
    for (int i = 0; i < 4; ++i) {
        ImageExample ex;
        ex.label = i;
        ex.image = Image(3, 3, 3);
        for (double& v : ex.image.px) v = static_cast<double>(rng.next_below(256)) / 255.0;
        ds.examples.push_back(std::move(ex));
    }
    ds.num_classes = 4;
    const auto path = tmp_file("roundtrip.rlxd");
    save_raw(path.string(), ds);
    ImageDataset back = load_raw(path.string());
    REQUIRE(back.size() == 4);
    CHECK(back.channels == 3);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.examples[i].label == ds.examples[i].label);
        for (std::size_t p = 0; p < ds.examples[i].image.px.size(); ++p) {
            CHECK(back.examples[i].image.px[p] == ds.examples[i].image.px[p]);
        }
    }

    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
    CHECK_THROWS_AS(load_raw(path.string()), data_error);
    {
        std::ofstream os(path, std::ios::binary);
        os << "WRONGMAGICFILE";
    }
    CHECK_THROWS_AS(load_raw(path.string()), data_error);
    std::filesystem::remove(path);
}

TEST_CASE("split_train_val: deterministic 9:1 permutation") {
    SplitIndices a = split_train_val(1000, 5);
    SplitIndices b = split_train_val(1000, 5);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.val.size() == 100);
    CHECK(a.train.size() == 900);

    std::vector<bool> seen(1000, false);
    for (std::size_t i : a.train) seen[i] = true;
    for (std::size_t i : a.val) seen[i] = true;
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool x) { return x; }));

    SplitIndices c = split_train_val(1000, 6);
    CHECK(a.train != c.train);
}
