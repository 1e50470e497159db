#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leafid/image.hpp"

namespace leafid {

// The two representations of one leaf: whole filtered leaf at 224x224 and a
// c x c crop from its center (texture/venation view).
struct ViewPair {
    Image global_view;  // 224 x 224 x 3
    Image local_view;   // c x c x 3
};

// Which side of the threshold is treated as leaf.
enum class LeafPolarity {
    darker,   // foreground = side with smaller mean intensity (scan default)
    brighter,
};

struct PreprocessConfig {
    int crop_size = 32;       // one of 32, 64, 128
    int kernel_radius = 3;    // structuring element radius for the opening
    LeafPolarity polarity = LeafPolarity::darker;

    void validate() const;
};

inline constexpr int kGlobalViewSize = 224;

// Luma conversion: round(0.299 R + 0.587 G + 0.114 B) per pixel.
GrayImage to_grayscale(const Image& img);

struct OtsuResult {
    int threshold = 0;   // in 0..255
    BinaryMask mask;     // pixels strictly greater than threshold
};

// Threshold maximizing between-class variance; ties resolved to the lowest
// threshold. A constant image yields (value, empty mask).
OtsuResult otsu_threshold(const GrayImage& gray);

// Morphological opening (erosion then dilation) with a disk-shaped element
// of the given radius. Removes structures thinner than the element, e.g. a
// leaf stem attached to the blade.
BinaryMask open_mask(const BinaryMask& mask, int kernel_radius);

// Crops to the minimal axis-aligned rectangle covering all foreground pixels.
// Throws a numeric error ("no leaf detected") for an empty mask.
Image bounding_box_crop(const Image& img, const BinaryMask& mask);

struct BBox {
    int y0, x0, y1, x1;  // inclusive
};
std::optional<BBox> mask_bounds(const BinaryMask& mask);

// Extracts the leaf mask from an RGB image: grayscale -> Otsu -> polarity
// selection -> opening. Throws if no foreground survives.
BinaryMask leaf_mask(const Image& img, const PreprocessConfig& cfg);

// Full two-view pipeline: filter background to white, crop the leaf bounding
// box, resize to 224x224, then cut the c x c center crop from that image.
ViewPair make_views(const Image& img, const PreprocessConfig& cfg);

// `count` copies rotated by uniform random angles (white fill), deterministic
// per seed.
std::vector<Image> augment_rotations(const Image& img, int count, std::uint64_t seed);

}  // namespace leafid
