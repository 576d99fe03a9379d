#pragma once

#include <vector>

#include "milgrade/image.hpp"
#include "milgrade/mil.hpp"

namespace milgrade {

inline constexpr int kDefaultPatchSize = 448;
inline constexpr double kDefaultTissueMin = 0.10;

// Mask value for the cribriform pattern; always excluded from extraction.
inline constexpr int kCribriformMask = 6;

struct PatchSample {
    Coord coord;
    int label = 0; // patch class 0..5, 0 = background/non-tumor
    double tissue_fraction = 0.0;
};

// Fraction of pixels whose HSV saturation is >= 8/255, with
// S = (max - min) / max over RGB and S = 0 when max = 0.
double tissue_fraction(const ImageRGB& image, int x0, int y0, int w, int h);
double tissue_fraction(const ImageRGB& image);

// Axis-aligned grid from the origin with stride patch_size, full patches
// only. A patch is kept iff the mask is single-valued on it, that value is
// not cribriform, and its tissue fraction reaches tissue_min.
std::vector<PatchSample> extract_labeled_patches(const ImageRGB& image, const ImageGray& mask,
                                                 int patch_size = kDefaultPatchSize,
                                                 double tissue_min = kDefaultTissueMin);

// Same grid, tissue test only; for unannotated slides.
std::vector<Coord> extract_tissue_patches(const ImageRGB& image,
                                          int patch_size = kDefaultPatchSize,
                                          double tissue_min = kDefaultTissueMin);

} // namespace milgrade
