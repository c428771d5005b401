#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ldmres/rng.hpp"
#include "ldmres/tensor.hpp"

namespace ldmres {

// ---- input normalization ----------------------------------------------------

// Per image and per channel: (x - mean) / (std + 1e-8), biased std.
Tensor4 zscore_normalize(const Tensor4& image);

// ---- augmentation -----------------------------------------------------------

struct AugmentPolicy {
    bool hflip = true;
    bool vflip = true;
    float brightness_lo = -0.2f, brightness_hi = 0.2f;  // additive, image only
    float contrast_lo = 0.8f, contrast_hi = 1.2f;       // scale about the channel mean
    float rotation_min_deg = 1.0f, rotation_max_deg = 360.0f;
    std::uint64_t seed = 0;
};

enum class Interp { Bilinear, Nearest };

// Geometry helpers; flips are exact index permutations, rotation is about the
// image center with zero fill outside.
Tensor4 flip_horizontal(const Tensor4& t);
Tensor4 flip_vertical(const Tensor4& t);
Tensor4 rotate(const Tensor4& t, float degrees, Interp interp);

Tensor4 adjust_brightness(const Tensor4& image, float delta);
Tensor4 adjust_contrast(const Tensor4& image, float factor);  // per-channel mean pivot

// One random draw from the policy: flips and rotation applied to image and
// mask alike (bilinear for the image, nearest for the mask), brightness and
// contrast to the image only. The mask stays binary.
void augment(Tensor4& image, Tensor4& mask, const AugmentPolicy& policy, Rng& draw);

// ---- patch extraction ---------------------------------------------------------

struct Patch {
    Tensor4 data;
    int y = 0, x = 0;  // origin in the (padded) source canvas
};

// Row-major non-overlapping tiling; images whose dims are not multiples of
// size are zero-padded at the bottom/right edges first.
std::vector<Patch> extract_patches(const Tensor4& image, int size);

// ---- dataset splitting --------------------------------------------------------

// Seeded-shuffle split into (train, validation); |train| = round(ratio * N).
template <class T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(const std::vector<T>& items,
                                                        double ratio, std::uint64_t seed) {
    if (items.empty())
        throw Error("split_dataset: empty item list");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw Error("split_dataset: ratio must be in (0,1)");
    std::vector<T> shuffled = items;
    Rng rng(seed);
    rng.shuffle(shuffled);
    const std::size_t k = std::size_t(std::llround(ratio * double(shuffled.size())));
    std::vector<T> train(shuffled.begin(), shuffled.begin() + std::ptrdiff_t(k));
    std::vector<T> val(shuffled.begin() + std::ptrdiff_t(k), shuffled.end());
    return {std::move(train), std::move(val)};
}

}  // namespace ldmres
