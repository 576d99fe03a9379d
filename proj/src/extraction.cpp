#include "milgrade/extraction.hpp"

#include <algorithm>
#include <string>

#include "milgrade/errors.hpp"

namespace milgrade {

double tissue_fraction(const ImageRGB& image, int x0, int y0, int w, int h) {
    std::size_t tissue = 0;
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
            const std::uint8_t* p = image.pixel(x, y);
            const int mx = std::max({p[0], p[1], p[2]});
            const int mn = std::min({p[0], p[1], p[2]});
            // S >= 8/255 as exact integer arithmetic: 255*(max-min) >= 8*max.
            if (mx > 0 && 255 * (mx - mn) >= 8 * mx) ++tissue;
        }
    }
    return static_cast<double>(tissue) / (static_cast<double>(w) * h);
}

double tissue_fraction(const ImageRGB& image) {
    return tissue_fraction(image, 0, 0, image.width, image.height);
}

std::vector<PatchSample> extract_labeled_patches(const ImageRGB& image, const ImageGray& mask,
                                                 int patch_size, double tissue_min) {
    if (image.width != mask.width || image.height != mask.height) {
        throw ContractError("extract_labeled_patches: image " + std::to_string(image.width) +
                            "x" + std::to_string(image.height) + " and mask " +
                            std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                            " sizes differ");
    }
    if (patch_size < 1) throw ContractError("extract_labeled_patches: patch_size must be >= 1");

    // Whole-mask validity scan, first offender wins.
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y) > kCribriformMask) {
                throw DataError("extract_labeled_patches: invalid mask value " +
                                std::to_string(mask.at(x, y)) + " at pixel (" +
                                std::to_string(x) + "," + std::to_string(y) + ")");
            }
        }
    }

    std::vector<PatchSample> out;
    for (int y0 = 0; y0 + patch_size <= image.height; y0 += patch_size) {
        for (int x0 = 0; x0 + patch_size <= image.width; x0 += patch_size) {
            const int value = mask.at(x0, y0);
            bool pure = true;
            for (int y = y0; pure && y < y0 + patch_size; ++y) {
                for (int x = x0; x < x0 + patch_size; ++x) {
                    if (mask.at(x, y) != value) {
                        pure = false;
                        break;
                    }
                }
            }
            if (!pure || value == kCribriformMask) continue;
            const double tissue = tissue_fraction(image, x0, y0, patch_size, patch_size);
            if (tissue < tissue_min) continue;
            out.push_back({Coord{x0, y0}, value, tissue});
        }
    }
    return out;
}

std::vector<Coord> extract_tissue_patches(const ImageRGB& image, int patch_size,
                                          double tissue_min) {
    if (patch_size < 1) throw ContractError("extract_tissue_patches: patch_size must be >= 1");
    std::vector<Coord> out;
    for (int y0 = 0; y0 + patch_size <= image.height; y0 += patch_size) {
        for (int x0 = 0; x0 + patch_size <= image.width; x0 += patch_size) {
            if (tissue_fraction(image, x0, y0, patch_size, patch_size) >= tissue_min) {
                out.push_back({x0, y0});
            }
        }
    }
    return out;
}

} // namespace milgrade
