#pragma once

// Deterministic synthetic datasets for the training-trend suites: a
// rendered-digit image corpus (ten glyph classes with random affine
// distortions, noise, and stroke variation) and a stage-play style text
// corpus with archaic vocabulary and rare-character events.

#include <cstdint>
#include <string>

#include "relax/data.hpp"

namespace relax::testing {

struct DigitStyle {
    double max_rotation_deg = 25.0;
    double min_scale = 0.72;
    double max_scale = 1.05;
    double max_shear = 0.22;
    double max_translate = 0.10; // glyph units
    double vertex_jitter = 0.025;
    double min_stroke = 0.035;
    double max_stroke = 0.065;
    double min_intensity = 0.65;
    double noise = 0.12;        // uniform background noise amplitude
    int max_clutter = 0;        // distractor strokes per image
    double invert_prob = 0.5;   // dark-on-light vs light-on-dark polarity
    bool split_polarity = false; // invert the two image halves independently
    // Dashed strokes: glyph lines are drawn in on/off runs (pixel units),
    // leaving gaps the reader has to bridge. Zero disables dashing.
    double dash_on = 0.0;
    double dash_off = 0.0;
    double salt_prob = 0.0;     // isolated bright specks
    // Discrete style modes. When non-empty these override the continuous
    // rotation/scale draws, giving each class a set of well-separated
    // appearance modes instead of one smoothly deformed template.
    std::vector<double> rotation_set_deg;
    std::vector<double> scale_set;
    // Partially visible neighbor digits at the frame edges, as in cropped
    // street-number photographs.
    double distractor_prob = 0.0;
};

/// Renders one 28x28 grayscale digit. All randomness comes from rng.
Image render_digit(int digit, Rng& rng, const DigitStyle& style = {});

/// n examples with labels cycling 0..9; example i draws from the
/// substream derive_seed(seed, i).
ImageDataset make_digit_dataset(std::size_t n, std::uint64_t seed,
                                const DigitStyle& style = {});

/// Play-like text of at least target_bytes: scene headers, speaker tags,
/// and sentences over a themed word bank. A small rate of typographic
/// variants exercises the preprocessing map, and a sub-threshold rate of
/// marker characters exercises the vocabulary placeholder.
std::string make_play_corpus(std::size_t target_bytes, std::uint64_t seed);

} // namespace relax::testing
