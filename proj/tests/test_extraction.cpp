#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "milgrade/errors.hpp"
#include "milgrade/extraction.hpp"
#include "milgrade/image.hpp"
#include "milgrade/rng.hpp"

using namespace milgrade;

namespace {

constexpr std::uint8_t kWhite = 255;

ImageRGB magenta_image(int w, int h) { return ImageRGB(w, h, 255, 0, 255); }

void paint_rect(ImageRGB& img, int x0, int y0, int w, int h, std::uint8_t r, std::uint8_t g,
                std::uint8_t b) {
    for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) img.set(x, y, r, g, b);
    }
}

std::set<std::pair<int, int>> coord_set(const std::vector<PatchSample>& patches) {
    std::set<std::pair<int, int>> out;
    for (const PatchSample& p : patches) out.insert({p.coord.x, p.coord.y});
    return out;
}

} // namespace

TEST_CASE("tissue fraction of uniform and half-and-half patches") {
    const ImageRGB white(8, 8, kWhite, kWhite, kWhite);
    CHECK(tissue_fraction(white) == 0.0);

    const ImageRGB magenta = magenta_image(8, 8);
    CHECK(tissue_fraction(magenta) == 1.0);

    ImageRGB half(8, 8, kWhite, kWhite, kWhite);
    paint_rect(half, 0, 0, 4, 8, 255, 0, 255);
    CHECK(tissue_fraction(half) == 0.5);

    // Black has max = 0, defined as zero saturation.
    const ImageRGB black(4, 4, 0, 0, 0);
    CHECK(tissue_fraction(black) == 0.0);

    // Exact threshold: (255,247,247) has S = 8/255, which passes.
    const ImageRGB edge(2, 2, 255, 247, 247);
    CHECK(tissue_fraction(edge) == 1.0);
    const ImageRGB below(2, 2, 255, 248, 248);
    CHECK(tissue_fraction(below) == 0.0);
}

TEST_CASE("896x896 all-tissue acinar mask yields exactly four patches") {
    const ImageRGB image = magenta_image(896, 896);
    const ImageGray mask(896, 896, 2); // acinar everywhere
    const std::vector<PatchSample> patches = extract_labeled_patches(image, mask);
    REQUIRE(patches.size() == 4);
    const std::set<std::pair<int, int>> coords = coord_set(patches);
    CHECK(coords == std::set<std::pair<int, int>>{{0, 0}, {448, 0}, {0, 448}, {448, 448}});
    for (const PatchSample& p : patches) {
        CHECK(p.label == 2);
        CHECK(p.tissue_fraction == 1.0);
    }
}

TEST_CASE("purity, cribriform, and tissue rules exclude patches") {
    ImageRGB image = magenta_image(896, 448);
    ImageGray mask(896, 448, 2);

    // Left patch straddles an acinar/solid boundary.
    for (int y = 0; y < 448; ++y) {
        for (int x = 200; x < 448; ++x) mask.set(x, y, 5);
    }
    std::vector<PatchSample> patches = extract_labeled_patches(image, mask);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].coord == Coord{448, 0});
    CHECK(patches[0].label == 5);

    // Pure cribriform right patch is excluded too.
    for (int y = 0; y < 448; ++y) {
        for (int x = 448; x < 896; ++x) mask.set(x, y, 6);
    }
    CHECK(extract_labeled_patches(image, mask).empty());

    // Pure background on white pixels fails the 10% tissue rule.
    ImageRGB white(448, 448, kWhite, kWhite, kWhite);
    ImageGray bg_mask(448, 448, 0);
    CHECK(extract_labeled_patches(white, bg_mask).empty());

    // Background over tissue-colored pixels is retained with label 0.
    ImageRGB pink = magenta_image(448, 448);
    patches = extract_labeled_patches(pink, bg_mask);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].label == 0);
}

TEST_CASE("errors: size mismatch and invalid mask value") {
    const ImageRGB image = magenta_image(896, 896);
    const ImageGray small_mask(448, 448, 0);
    bool threw = false;
    try {
        extract_labeled_patches(image, small_mask);
    } catch (const ContractError& e) {
        threw = true;
        const std::string msg = e.what();
        CHECK(msg.find("896x896") != std::string::npos);
        CHECK(msg.find("448x448") != std::string::npos);
    }
    CHECK(threw);

    ImageGray bad_mask(896, 896, 0);
    bad_mask.set(17, 23, 7);
    threw = false;
    try {
        extract_labeled_patches(image, bad_mask);
    } catch (const DataError& e) {
        threw = true;
        const std::string msg = e.what();
        CHECK(msg.find("(17,23)") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("tissue-only extraction on simple rasters") {
    const ImageRGB white(1344, 448, kWhite, kWhite, kWhite);
    CHECK(extract_tissue_patches(white).empty());

    const ImageRGB tissue = magenta_image(1344, 448);
    const std::vector<Coord> coords = extract_tissue_patches(tissue);
    REQUIRE(coords.size() == 3);
    CHECK(coords[0] == Coord{0, 0});
    CHECK(coords[1] == Coord{448, 0});
    CHECK(coords[2] == Coord{896, 0});

    // Margins shorter than a patch are ignored.
    const ImageRGB margin = magenta_image(1000, 500);
    CHECK(extract_tissue_patches(margin).size() == 2);
}

TEST_CASE("randomized toy rasters match exhaustive per-patch recomputation") {
    // 8x8 patch grid with patch_size 8 keeps the oracle cheap.
    const int ps = 8;
    const int grid = 8;
    const int side = ps * grid;
    Rng rng(2024);

    for (int trial = 0; trial < 10; ++trial) {
        ImageRGB image(side, side);
        ImageGray mask(side, side);
        // Blocky content: each patch cell gets a dominant mask value and a
        // tissue probability, with per-pixel corruption to create impure and
        // low-tissue patches.
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx) {
                const int cell_value = static_cast<int>(rng.uniform_int(0, 6));
                const double tissue_p = rng.uniform01();
                const bool corrupt = rng.uniform01() < 0.3;
                for (int y = gy * ps; y < (gy + 1) * ps; ++y) {
                    for (int x = gx * ps; x < (gx + 1) * ps; ++x) {
                        if (rng.uniform01() < tissue_p) {
                            image.set(x, y, 200, static_cast<std::uint8_t>(rng.uniform_int(0, 80)),
                                      180);
                        } else {
                            image.set(x, y, kWhite, kWhite, kWhite);
                        }
                        int value = cell_value;
                        if (corrupt && rng.uniform01() < 0.1) {
                            value = static_cast<int>(rng.uniform_int(0, 6));
                        }
                        mask.set(x, y, static_cast<std::uint8_t>(value));
                    }
                }
            }
        }

        // Exhaustive oracle, written directly from the rules.
        std::vector<PatchSample> expected;
        for (int y0 = 0; y0 + ps <= side; y0 += ps) {
            for (int x0 = 0; x0 + ps <= side; x0 += ps) {
                bool pure = true;
                const int value = mask.at(x0, y0);
                int tissue_pixels = 0;
                for (int y = y0; y < y0 + ps; ++y) {
                    for (int x = x0; x < x0 + ps; ++x) {
                        if (mask.at(x, y) != value) pure = false;
                        const std::uint8_t* px = image.pixel(x, y);
                        const int mx = std::max({px[0], px[1], px[2]});
                        const int mn = std::min({px[0], px[1], px[2]});
                        const double sat = mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
                        if (sat >= 8.0 / 255.0) ++tissue_pixels;
                    }
                }
                const double frac = static_cast<double>(tissue_pixels) / (ps * ps);
                if (pure && value != 6 && frac >= 0.10) {
                    expected.push_back({Coord{x0, y0}, value, frac});
                }
            }
        }

        const std::vector<PatchSample> got = extract_labeled_patches(image, mask, ps, 0.10);
        REQUIRE(got.size() == expected.size());
        CHECK(coord_set(got) == coord_set(expected));
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].label == expected[i].label);
            CHECK(got[i].tissue_fraction == doctest::Approx(expected[i].tissue_fraction));
        }

        // Tissue-only route agrees with its own brute force on the same image.
        std::vector<Coord> tissue_got = extract_tissue_patches(image, ps, 0.10);
        std::vector<Coord> tissue_oracle;
        for (int y0 = 0; y0 + ps <= side; y0 += ps) {
            for (int x0 = 0; x0 + ps <= side; x0 += ps) {
                int tissue_pixels = 0;
                for (int y = y0; y < y0 + ps; ++y) {
                    for (int x = x0; x < x0 + ps; ++x) {
                        const std::uint8_t* px = image.pixel(x, y);
                        const int mx = std::max({px[0], px[1], px[2]});
                        const int mn = std::min({px[0], px[1], px[2]});
                        const double sat = mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
                        if (sat >= 8.0 / 255.0) ++tissue_pixels;
                    }
                }
                if (static_cast<double>(tissue_pixels) / (ps * ps) >= 0.10) {
                    tissue_oracle.push_back({x0, y0});
                }
            }
        }
        CHECK(tissue_got.size() == tissue_oracle.size());
        for (std::size_t i = 0; i < tissue_got.size(); ++i) {
            CHECK(tissue_got[i] == tissue_oracle[i]);
        }

        // Retained count can never exceed the grid capacity.
        CHECK(got.size() <= static_cast<std::size_t>(grid * grid));
    }
}

TEST_CASE("ppm/pgm round-trip and malformed headers") {
    Rng rng(9);
    ImageRGB img(13, 7);
    for (std::uint8_t& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const auto dir = std::filesystem::temp_directory_path();
    const auto ppm_path = dir / "milgrade_test.ppm";
    write_ppm(img, ppm_path);
    const ImageRGB back = read_ppm(ppm_path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.data == img.data);

    ImageGray mask(5, 9);
    for (std::uint8_t& v : mask.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 6));
    const auto pgm_path = dir / "milgrade_test.pgm";
    write_pgm(mask, pgm_path);
    const ImageGray mask_back = read_pgm(pgm_path);
    CHECK(mask_back.data == mask.data);

    // P5 data under a P6 magic and truncated payloads must be rejected.
    CHECK_THROWS_AS(read_pgm(ppm_path), FormatError);
    CHECK_THROWS_AS(read_ppm(pgm_path), FormatError);
    {
        std::ofstream os(ppm_path, std::ios::binary);
        os << "P6\n13 7\n255\n";
        os << "short";
    }
    CHECK_THROWS_AS(read_ppm(ppm_path), FormatError);
    std::filesystem::remove(ppm_path);
    std::filesystem::remove(pgm_path);
}
